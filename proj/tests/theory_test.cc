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


#include "marlhf/theory.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "marlhf/equilibrium.h"
#include "test_util.h"

namespace marlhf {
namespace {

// Dataset, covariances and estimate kept alive for a TheoryContext.
struct Fixture {
  Fixture(const MarkovGame& game, PreferenceDataset d, const TheoryConfig& config,
          double c = 0.1)
      : data(std::move(d)), cov(BuildCovariances(data, game.features(), config.lambda)) {
    MleConfig mle;
    mle.c = c;
    mle.lambda = config.lambda;
    estimate = data.pairs.empty()
                   ? EmptyRewardEstimate(game.features(), game.num_players(), mle)
                   : FitLinearMle(data, game.features(), mle);
    context.emplace(data, game.features(), cov, estimate, config);
  }
  PreferenceDataset data;
  CovarianceSet cov;
  RewardEstimate estimate;
  std::optional<TheoryContext> context;
};

PreferenceDataset Empty(const MarkovGame& game) {
  PreferenceDataset d;
  d.meta.num_players = game.num_players();
  d.meta.horizon = game.horizon();
  return d;
}

MarkovGame LinearGame(std::uint64_t seed) {
  RandomLinearGameParams params;
  params.dim = 4;
  params.seed = seed;
  return BuildRandomLinearGame(params);
}

TEST(TransitionConstantTest, Formula) {
  EXPECT_DOUBLE_EQ(TransitionBonusConstant(0.1, 4, 200, 3, 0.05),
                   0.1 * 4 * 3 * std::sqrt(std::log(2.0 * 4 * 200 * 3 / 0.05)));
  // Zero samples are treated as one.
  EXPECT_DOUBLE_EQ(TransitionBonusConstant(1.0, 2, 0, 1, 0.5),
                   TransitionBonusConstant(1.0, 2, 1, 1, 0.5));
}

TEST(TheoryContextTest, SampleCountIsTwicePairs) {
  const MarkovGame game = LinearGame(1);
  TheoryConfig config;
  const Fixture f(game, testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 25, 1),
                  config);
  EXPECT_EQ(f.context->num_samples(), 50);
  EXPECT_DOUBLE_EQ(f.context->transition_constant(),
                   TransitionBonusConstant(config.c_p, 4, 50, game.horizon(), config.delta));
  int total = 0;
  for (int h = 0; h < game.horizon(); ++h) {
    for (const SampleGroup& g : f.context->samples(h)) total += g.count;
  }
  EXPECT_EQ(total, 50 * game.horizon());
}

TEST(EmptyDataTest, PessimismIsZeroAndOptimismSaturates) {
  const Counterexample ce = BuildCounterexample();
  TheoryConfig config;
  config.c_p = 10.0;
  const Fixture f(ce.m1, Empty(ce.m1), config);
  const JointPolicy pi = JointPolicy::Uniform(ce.m1.shape());
  for (int i = 0; i < 2; ++i) {
    const ValueEstimate low = f.context->PessimisticValue(pi, i);
    const ValueEstimate high = f.context->OptimisticBestResponse(pi, i);
    for (int a = 0; a < 4; ++a) {
      EXPECT_EQ(low.Q(0, 0, a), 0.0);
      EXPECT_EQ(high.Q(0, 0, a), static_cast<double>(ce.m1.horizon()));
    }
  }
  EXPECT_DOUBLE_EQ(f.context->Surrogate(pi, 0), 2.0);
}

TEST(ValueEstimateTest, ClippedAndConsistent) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const MarkovGame game = LinearGame(20 + seed);
    const JointPolicy pi = JointPolicy::Uniform(game.shape());
    TheoryConfig config;
    const Fixture f(game, testing::RawDataset(game, pi, 40, seed), config);
    const int H = game.horizon(), S = game.num_states(), A = game.num_joint_actions();
    std::vector<double> dist(A);
    for (int i = 0; i < 2; ++i) {
      const ValueEstimate low = f.context->PessimisticValue(pi, i);
      const ValueEstimate high = f.context->OptimisticBestResponse(pi, i);
      for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
          double v_low = 0.0;
          std::vector<double> own(game.num_actions(i), 0.0);
          pi.JointDistribution(h, s, dist);
          std::vector<double> others(A);
          pi.OthersDistribution(h, s, i, others);
          for (int a = 0; a < A; ++a) {
            EXPECT_GE(low.Q(h, s, a), 0.0);
            EXPECT_LE(low.Q(h, s, a), H);
            EXPECT_GE(high.Q(h, s, a), 0.0);
            EXPECT_LE(high.Q(h, s, a), H);
            v_low += dist[a] * low.Q(h, s, a);
            own[game.shape().ActionOf(a, i)] += others[a] * high.Q(h, s, a);
          }
          EXPECT_NEAR(low.v[h * S + s], v_low, 1e-9);
          EXPECT_NEAR(high.v[h * S + s], *std::max_element(own.begin(), own.end()), 1e-9);
          EXPECT_EQ(own[high.best_action[h * S + s]], high.v[h * S + s]);
        }
      }
      for (int s = 0; s < S; ++s) {
        EXPECT_EQ(low.v[H * S + s], 0.0);
        EXPECT_EQ(high.v[H * S + s], 0.0);
      }
    }
  }
}

// With orthogonal features the regression decouples per (s, a), so the
// optimistic table dominates the pessimistic one and the surrogate is
// nonnegative for every policy.
TEST(SurrogateTest, NonnegativeWithOrthogonalFeatures) {
  const Counterexample ce = BuildCounterexample();
  const Fixture f(ce.m1, testing::RawDataset(ce.m1, JointPolicy::Uniform(ce.m1.shape()), 50, 2),
                  TheoryConfig{});
  for (const JointPolicy& pi : testing::AllDeterministic(ce.m1.shape())) {
    EXPECT_GE(f.context->Surrogate(pi, 0), -1e-12);
  }
}

// On the confidence event the surrogate upper-bounds the true gap.
TEST(SurrogateTest, DominatesNashGapWithWideConfidence) {
  const MarkovGame game = LinearGame(33);
  const JointPolicy behavior = JointPolicy::Uniform(game.shape());
  TheoryConfig config;
  const Fixture f(game, testing::RawDataset(game, behavior, 200, 3), config, 1.0);
  for (const JointPolicy& pi : testing::AllDeterministic(game.shape())) {
    EXPECT_GE(f.context->Surrogate(pi, game.initial_state()) + 1e-9,
              NashGap(game, pi).total_gap);
  }
}

// The uncertainty that drives pessimism shrinks as data grows.
TEST(MonotonePessimismTest, TransitionBonusNonIncreasingOnNestedData) {
  const MarkovGame game = LinearGame(44);
  const PreferenceDataset full =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 80, 5);
  std::vector<double> previous;
  for (int n : {0, 1, 4, 16, 80}) {
    PreferenceDataset prefix = full;
    prefix.pairs.resize(n);
    const Fixture f(game, prefix, TheoryConfig{});
    std::vector<double> current;
    for (int h = 0; h < game.horizon(); ++h) {
      for (int s = 0; s < game.num_states(); ++s) {
        for (int a = 0; a < game.num_joint_actions(); ++a) {
          current.push_back(f.context->TransitionBonus(h, s, a));
        }
      }
    }
    for (std::size_t k = 0; k < previous.size(); ++k) {
      EXPECT_LE(current[k], previous[k] + 1e-9) << "n=" << n;
    }
    previous = current;
  }
}

TEST(SurrogateMinimizeTest, CountsAndCap) {
  const Counterexample ce = BuildCounterexample();
  EXPECT_EQ(DeterministicPolicyCount(ce.m1.shape(), 1000), 4);
  const MarkovGame grid = BuildGridSpread({2, 3, 5});
  EXPECT_GT(DeterministicPolicyCount(grid.shape(), 1'000'000), 1'000'000);
  TheoryConfig config;
  config.max_candidates = 3;
  const Fixture f(ce.m1, Empty(ce.m1), config);
  EXPECT_THROW(SurrogateMinimize(*f.context, ce.m1.shape(), 0, config), SizingError);
}

TEST(SurrogateMinimizeTest, TiesKeepTheFirstCandidate) {
  const Counterexample ce = BuildCounterexample();
  TheoryConfig config;
  const Fixture f(ce.m1, Empty(ce.m1), config);
  std::ostringstream trace;
  const SurrogateResult result = SurrogateMinimize(*f.context, ce.m1.shape(), 0, config, &trace);
  EXPECT_EQ(result.num_candidates, 4);
  EXPECT_EQ(result.candidate_index, 0);
  EXPECT_EQ(result.policy, JointPolicy::Constant(ce.m1.shape(), 0));
  const std::string text = trace.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);  // header + 4 rows
}

TEST(SurrogateMinimizeTest, MatchesExplicitCandidateScan) {
  const MarkovGame game = LinearGame(55);
  TheoryConfig config;
  const Fixture f(game, testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 60, 8),
                  config);
  const auto candidates = testing::AllDeterministic(game.shape());
  const SurrogateResult enumerated = SurrogateMinimize(*f.context, game.shape(), 0, config);
  const SurrogateResult listed = SurrogateMinimize(*f.context, candidates, 0);
  EXPECT_EQ(enumerated.candidate_index, listed.candidate_index);
  EXPECT_EQ(enumerated.policy, listed.policy);
  double best = INFINITY;
  for (const JointPolicy& pi : candidates) best = std::min(best, f.context->Surrogate(pi, 0));
  EXPECT_DOUBLE_EQ(enumerated.surrogate, best);
}

TEST(SurrogateMinimizeTest, OutputSurrogateDecreasesWithData) {
  const MarkovGame game = LinearGame(77);
  const JointPolicy behavior = JointPolicy::Uniform(game.shape());
  TheoryConfig config;
  std::vector<double> medians;
  for (int n : {100, 1000, 10000}) {
    std::vector<double> values;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Fixture f(game, testing::RawDataset(game, behavior, n, seed), config);
      values.push_back(SurrogateMinimize(*f.context, game.shape(), 0, config).surrogate);
    }
    std::nth_element(values.begin(), values.begin() + 5, values.end());
    medians.push_back(values[5]);
  }
  EXPECT_LT(medians[1], medians[0]);
  EXPECT_LT(medians[2], medians[1]);
}

TEST(UnilateralBoundTest, ShrinksWithData) {
  const MarkovGame game = LinearGame(66);
  const JointPolicy pi = JointPolicy::Uniform(game.shape());
  const PreferenceDataset full = testing::RawDataset(game, pi, 200, 4);
  PreferenceDataset small = full;
  small.pairs.resize(10);
  const Fixture a(game, small, TheoryConfig{});
  const Fixture b(game, full, TheoryConfig{});
  const double bound_small = UnilateralBound(*a.context, game, pi);
  const double bound_full = UnilateralBound(*b.context, game, pi);
  EXPECT_GT(bound_small, 0.0);
  EXPECT_LT(bound_full, bound_small);
}

TEST(TheoryContextTest, RejectsMismatchedInputs) {
  const MarkovGame game = LinearGame(1);
  const Counterexample ce = BuildCounterexample();
  const PreferenceDataset data = Empty(game);
  const CovarianceSet cov = BuildCovariances(data, game.features());
  const RewardEstimate wrong = EmptyRewardEstimate(ce.m1.features(), 2, MleConfig{});
  EXPECT_THROW(TheoryContext(data, game.features(), cov, wrong, TheoryConfig{}),
               DimensionError);
}

}  // namespace
}  // namespace marlhf
