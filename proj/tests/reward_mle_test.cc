// Copyright 2026 The marlhf-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "marlhf/reward_mle.h"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.h"

namespace marlhf {
namespace {

double Norm(std::span<const double> v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

// One player, one step, two actions; psi(a0) = 1, psi(a1) = 0 in R^1 and the
// oracle pays 1 for a0.
struct Bandit {
  Bandit()
      : game(testing::UniformTransitionGame(
            1, 1, 1, {2}, [](int, int, int a, int) { return a == 0 ? 1.0 : 0.0; })),
        features(LinearParameterization::Dense(game.shape(), 1, {1.0, 0.0}, {1.0},
                                               {1.0})) {}
  MarkovGame game;
  LinearParameterization features;
};

PreferenceDataset BanditDataset(const Bandit& b, int pairs, std::uint64_t seed) {
  TrajectoryPool pool;
  Trajectory t0, t1;
  t0.states = t1.states = {0, 0};
  t0.joint_actions = {0};
  t1.joint_actions = {1};
  pool.trajectories = {t0, t1};
  pool.tags = {"a0", "a1"};
  pool.pairs.assign(pairs, {0, 1});
  LabelConfig lc;
  lc.mode = LabelMode::kRaw;
  lc.steepness = 1.0;
  lc.seed = seed;
  return LabelPreferences(pool, b.game, lc);
}

MarkovGame LinearGame(std::uint64_t seed) {
  RandomLinearGameParams params;
  params.dim = 3;
  params.seed = seed;
  return BuildRandomLinearGame(params);
}

TEST(MleTest, BalancedLabelsGiveNearZeroEstimate) {
  const MarkovGame game = LinearGame(1);
  PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 200, 3);
  // Every comparison appears once with each label.
  const std::size_t n = data.pairs.size();
  for (std::size_t k = 0; k < n; ++k) {
    PreferencePair flipped = data.pairs[k];
    for (int& l : flipped.labels) l = -l;
    data.pairs.push_back(flipped);
  }
  const RewardEstimate est = FitLinearMle(data, game.features(), MleConfig{});
  for (int i = 0; i < 2; ++i) EXPECT_LE(Norm(est.theta_hat[i]), 0.05);
}

TEST(MleTest, BanditRecoversTrueParameter) {
  const Bandit b;
  const RewardEstimate est = FitLinearMle(BanditDataset(b, 20000, 5), b.features, MleConfig{});
  ASSERT_EQ(est.theta_hat.size(), 1u);
  EXPECT_GE(est.theta_hat[0][0], 0.9);
  EXPECT_LE(est.theta_hat[0][0], 1.1);
  EXPECT_TRUE(est.diagnostics[0].converged);
}

TEST(MleTest, EstimateRespectsNormConstraint) {
  const Bandit b;
  // Unanimous labels push the unconstrained optimum to infinity.
  PreferenceDataset data = BanditDataset(b, 100, 1);
  for (PreferencePair& p : data.pairs) p.labels = {1};
  const RewardEstimate est = FitLinearMle(data, b.features, MleConfig{});
  EXPECT_LE(std::abs(est.theta_hat[0][0]), 1.0 + 1e-12);
  EXPECT_NEAR(est.theta_hat[0][0], 1.0, 1e-9);
}

TEST(MleTest, FittedLossNeverExceedsTruthOrZero) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const MarkovGame game = LinearGame(10 + seed);
    const PreferenceDataset data =
        testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 300, seed);
    const RewardEstimate est = FitLinearMle(data, game.features(), MleConfig{});
    for (int i = 0; i < 2; ++i) {
      const double fitted = PreferenceNll(data, game.features(), i, est.theta_hat[i]);
      const std::vector<double> truth = StackedTheta(game.features(), i);
      const std::vector<double> zero(truth.size(), 0.0);
      EXPECT_LE(fitted, PreferenceNll(data, game.features(), i, truth) + 1e-6);
      EXPECT_LE(fitted, PreferenceNll(data, game.features(), i, zero) + 1e-12);
      EXPECT_NEAR(PreferenceNll(data, game.features(), i, zero), std::log(2.0), 1e-12);
      EXPECT_NEAR(est.diagnostics[i].loss, fitted, 1e-9);
    }
  }
}

TEST(MleTest, NllIsConvex) {
  const MarkovGame game = LinearGame(4);
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 100, 9);
  Rng rng(3);
  const std::size_t n = game.horizon() * game.features().dim();
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(n), y(n), mid(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = 4.0 * Uniform01(rng) - 2.0;
      y[k] = 4.0 * Uniform01(rng) - 2.0;
      mid[k] = 0.5 * (x[k] + y[k]);
    }
    const auto& f = game.features();
    EXPECT_LE(PreferenceNll(data, f, 0, mid),
              0.5 * (PreferenceNll(data, f, 0, x) + PreferenceNll(data, f, 0, y)) + 1e-12);
  }
}

TEST(ConfidenceTest, RadiusFormula) {
  const double r = ConfidenceRadius(0.5, 0.05, 2.0, 100, 4, 3);
  EXPECT_DOUBLE_EQ(r, 0.5 * std::sqrt((12.0 + std::log(20.0)) / 400.0 + 4.0));
  double last = INFINITY;
  for (int n : {1, 10, 100, 1000, 100000}) {
    const double rn = ConfidenceRadius(1.0, 0.05, 1.0, n, 4, 3);
    EXPECT_LT(rn, last);
    EXPECT_GT(rn, 2.0);
    last = rn;
  }
}

TEST(ConfidenceTest, UnitEllipsoidBoundsAreSymmetric) {
  const Bandit b;
  RewardEstimate est = EmptyRewardEstimate(b.features, 1, MleConfig{});
  est.confidence_radius = 1.0;
  const RewardInterval at_a0 = RewardBounds(est, b.features, 0, 0, 0, 0);
  EXPECT_DOUBLE_EQ(at_a0.lower, -1.0);
  EXPECT_DOUBLE_EQ(at_a0.upper, 1.0);
  const RewardInterval at_a1 = RewardBounds(est, b.features, 0, 0, 0, 1);
  EXPECT_DOUBLE_EQ(at_a1.lower, 0.0);
  EXPECT_DOUBLE_EQ(at_a1.upper, 0.0);
}

// Replicating a dataset leaves the normalized Gram matrix unchanged, so the
// interval width shrinks through the radius alone.
TEST(ConfidenceTest, ReplicatedDataNarrowsIntervals) {
  const MarkovGame game = LinearGame(7);
  const PreferenceDataset base =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 50, 2);
  PreferenceDataset big = base;
  for (int rep = 0; rep < 9; ++rep) {
    big.pairs.insert(big.pairs.end(), base.pairs.begin(), base.pairs.end());
  }
  const auto& f = game.features();
  const RewardEstimate small_est = FitLinearMle(base, f, MleConfig{});
  const RewardEstimate big_est = FitLinearMle(big, f, MleConfig{});
  for (int h = 0; h < game.horizon(); ++h) {
    for (int s = 0; s < game.num_states(); ++s) {
      for (int a = 0; a < game.num_joint_actions(); ++a) {
        const RewardInterval x = RewardBounds(small_est, f, 0, h, s, a);
        const RewardInterval y = RewardBounds(big_est, f, 0, h, s, a);
        const double ratio = (y.upper - y.lower) / (x.upper - x.lower);
        EXPECT_NEAR(ratio, big_est.confidence_radius / small_est.confidence_radius, 1e-6);
        EXPECT_LT(ratio, 1.0);
      }
    }
  }
  // The estimate itself is unchanged by replication.
  for (std::size_t k = 0; k < small_est.theta_hat[0].size(); ++k) {
    EXPECT_NEAR(small_est.theta_hat[0][k], big_est.theta_hat[0][k], 1e-4);
  }
}

TEST(ConfidenceTest, DistanceIsZeroAtEstimate) {
  const MarkovGame game = LinearGame(8);
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 40, 2);
  const RewardEstimate est = FitLinearMle(data, game.features(), MleConfig{});
  EXPECT_NEAR(ConfidenceDistance(est, 1, est.theta_hat[1]), 0.0, 1e-12);
  EXPECT_GT(ConfidenceDistance(est, 1, StackedTheta(game.features(), 1)), 0.0);
}

TEST(MleTest, RejectsEmptyDatasetAndBadDelta) {
  const Bandit b;
  EXPECT_THROW(FitLinearMle(PreferenceDataset{}, b.features, MleConfig{}), ConfigError);
  MleConfig bad;
  bad.delta = 1.5;
  EXPECT_THROW(FitLinearMle(BanditDataset(b, 10, 1), b.features, bad), ConfigError);
}

}  // namespace
}  // namespace marlhf
