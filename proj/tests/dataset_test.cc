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


#include "marlhf/dataset.h"

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "test_util.h"

namespace marlhf {
namespace {

template <class T>
concept CarriesRewards = requires(T t) { t.realized_rewards; } ||
                         requires(T t) { t.rewards; } ||
                         requires(T t) { t.returns; };

// Learner-facing types cannot hold reward information.
static_assert(!CarriesRewards<StepSequence>);
static_assert(!CarriesRewards<PreferencePair>);
static_assert(CarriesRewards<Trajectory>);

// One player, one step, action 0 earns 1 and action 1 earns 0.
MarkovGame OneArmedGame() {
  return testing::UniformTransitionGame(1, 1, 1, {2}, [](int, int, int a, int) {
    return a == 0 ? 1.0 : 0.0;
  });
}

Trajectory Fixed(int action) {
  Trajectory t;
  t.states = {0, 0};
  t.joint_actions = {action};
  return t;
}

TEST(ApportionTest, DiversifiedSplitsEvenly) {
  const auto counts = ApportionCounts(MixtureByName("Diversified"), 38400);
  for (int c : counts) EXPECT_EQ(c, 9600);
}

TEST(ApportionTest, MixExpertSplitsThreeToOne) {
  const auto counts = ApportionCounts(MixtureByName("Mix-Expert"), 38400);
  EXPECT_EQ(counts[0], 28800);
  EXPECT_EQ(counts[1], 0);
  EXPECT_EQ(counts[2], 0);
  EXPECT_EQ(counts[3], 9600);
}

TEST(ApportionTest, CountsAlwaysSumToTotal) {
  for (const std::string& name : MixtureNames()) {
    for (int total : {4, 5, 6, 7, 39, 40, 101, 999}) {
      const auto counts = ApportionCounts(MixtureByName(name), total);
      EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), 0), total)
          << name << " " << total;
    }
  }
  const auto odd = ApportionCounts({1.0, 1.0, 1.0, 0.0}, 10);
  EXPECT_EQ(odd[3], 0);
  EXPECT_EQ(odd[0] + odd[1] + odd[2], 10);
}

TEST(ApportionTest, EveryActiveComponentGetsATrajectory) {
  EXPECT_THROW(ApportionCounts(MixtureByName("Diversified"), 3), SizingError);
  const auto counts = ApportionCounts(MixtureByName("Pure-Expert"), 1);
  EXPECT_EQ(counts[0], 1);
}

TEST(ApportionTest, RejectsBadRatios) {
  EXPECT_THROW(ApportionCounts({-1.0, 1.0, 1.0, 1.0}, 10), ConfigError);
  EXPECT_THROW(MixtureByName("Everything"), ConfigError);
}

class CollectTest : public ::testing::Test {
 protected:
  CollectTest() : game_(BuildGridSpread({2, 3, 3})) {
    const double temps[] = {1.0};
    suite_ = DeriveBehaviorSuite(game_, temps);
  }
  MarkovGame game_;
  BehaviorSuite suite_;
};

TEST_F(CollectTest, PairCountIsTotalTimesMultiplier) {
  const TrajectoryPool pool =
      CollectDataset(game_, suite_, MixtureByName("Diversified"), 40, 10, 1);
  EXPECT_EQ(pool.trajectories.size(), 40u);
  EXPECT_EQ(pool.pairs.size(), 400u);
  int total = 0;
  for (const auto& [name, count] : pool.component_counts) total += count;
  EXPECT_EQ(total, 40);
  for (const auto& [a, b] : pool.pairs) {
    EXPECT_GE(a, 0);
    EXPECT_LT(a, 40);
    EXPECT_GE(b, 0);
    EXPECT_LT(b, 40);
  }
}

TEST_F(CollectTest, SameSeedSameDataset) {
  LabelConfig lc;
  lc.seed = 3;
  auto build = [&](std::uint64_t seed) {
    return LabelPreferences(
        CollectDataset(game_, suite_, MixtureByName("Mix-Unilateral"), 30, 2, seed),
        game_, lc);
  };
  EXPECT_EQ(build(11), build(11));
  EXPECT_EQ(build(11).ToJsonl(), build(11).ToJsonl());
  EXPECT_NE(build(11).ToJsonl(), build(12).ToJsonl());
}

TEST_F(CollectTest, JsonlRoundTrip) {
  LabelConfig lc;
  const PreferenceDataset data = LabelPreferences(
      CollectDataset(game_, suite_, MixtureByName("Diversified"), 20, 3, 5), game_, lc);
  EXPECT_EQ(PreferenceDataset::FromJsonl(data.ToJsonl()), data);
  EXPECT_EQ(data.meta.total_trajectories, 20);
  EXPECT_EQ(data.pairs.size(), 60u);
}

TEST_F(CollectTest, RookieTemperatureLimits) {
  // Near-zero temperature recovers the greedy response to the expert, which
  // is the expert itself; a huge one is uniform.
  const JointPolicy cold = SoftenedPolicy(game_, suite_.expert, 1e-6);
  const JointPolicy hot = SoftenedPolicy(game_, suite_.expert, 1e6);
  const auto expert_value = InitialValues(game_, suite_.expert);
  const auto cold_value = InitialValues(game_, cold);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(cold_value[i], expert_value[i], 1e-6);
  for (int h = 0; h < game_.horizon(); ++h) {
    for (int i = 0; i < 2; ++i) {
      for (int s = 0; s < game_.num_states(); s += 7) {
        for (double p : hot.Row(h, i, s)) EXPECT_NEAR(p, 0.2, 1e-5);
      }
    }
  }
  EXPECT_THROW(SoftenedPolicy(game_, suite_.expert, 0.0), ConfigError);
}

TEST_F(CollectTest, SuiteHasOneUnilateralPerPlayer) {
  EXPECT_EQ(suite_.unilateral.size(), 2u);
  EXPECT_TRUE(suite_.expert.IsDeterministic());
  for (int i = 0; i < 2; ++i) {
    const JointPolicy& u = suite_.unilateral[i];
    for (int h = 0; h < game_.horizon(); ++h) {
      for (int s = 0; s < game_.num_states(); ++s) {
        const int other = 1 - i;
        EXPECT_EQ(u.Greedy(h, other, s), suite_.expert.Greedy(h, other, s));
        EXPECT_DOUBLE_EQ(u.Prob(h, other, s, u.Greedy(h, other, s)), 1.0);
      }
    }
  }
}

TEST(PreferenceProbabilityTest, LogisticInReturnGap) {
  EXPECT_DOUBLE_EQ(PreferenceProbability(3.0, 1.0, 1.0), Sigmoid(2.0));
  EXPECT_DOUBLE_EQ(PreferenceProbability(1.0, 1.0, 5.0), 0.5);
  for (double a : {0.0, 0.3, 2.5}) {
    for (double b : {0.0, 1.7}) {
      EXPECT_NEAR(PreferenceProbability(a, b, 2.0) + PreferenceProbability(b, a, 2.0),
                  1.0, 1e-15);
    }
  }
}

TEST(LabelTest, EmpiricalFrequencyMatchesLogistic) {
  const MarkovGame game = OneArmedGame();
  TrajectoryPool pool;
  pool.trajectories = {Fixed(0), Fixed(1)};
  pool.tags = {"x", "y"};
  constexpr int kPairs = 10000;
  pool.pairs.assign(kPairs, {0, 1});
  LabelConfig lc;
  lc.mode = LabelMode::kRaw;
  lc.steepness = 2.0;
  lc.seed = 17;
  const PreferenceDataset data = LabelPreferences(pool, game, lc);
  ASSERT_EQ(data.pairs.size(), static_cast<std::size_t>(kPairs));
  int wins = 0;
  for (const PreferencePair& p : data.pairs) {
    ASSERT_EQ(p.labels.size(), 1u);
    ASSERT_TRUE(p.labels[0] == 1 || p.labels[0] == -1);
    wins += p.labels[0] == 1 ? 1 : 0;
  }
  EXPECT_NEAR(static_cast<double>(wins) / kPairs, Sigmoid(2.0), 0.01);
}

TEST(LabelTest, SwappedPairsFlipTheFrequency) {
  const MarkovGame game = OneArmedGame();
  TrajectoryPool pool;
  pool.trajectories = {Fixed(0), Fixed(1)};
  pool.tags = {"x", "y"};
  pool.pairs.assign(10000, {1, 0});
  LabelConfig lc;
  lc.mode = LabelMode::kRaw;
  lc.steepness = 2.0;
  const PreferenceDataset data = LabelPreferences(pool, game, lc);
  int wins = 0;
  for (const PreferencePair& p : data.pairs) wins += p.labels[0] == 1 ? 1 : 0;
  EXPECT_NEAR(wins / 10000.0, 1.0 - Sigmoid(2.0), 0.01);
}

TEST(LabelTest, ZeroVarianceFallsBackToRawWithWarning) {
  const MarkovGame game = testing::UniformTransitionGame(
      2, 2, 2, {2, 2}, [](int, int, int, int) { return 0.3; });
  PolicyMixture mixture{{1.0}, {JointPolicy::Uniform(game.shape())}};
  const TrajectoryPool pool = CollectIndependentPairs(game, mixture, 50, 4);
  LabelConfig lc;
  lc.mode = LabelMode::kStandardized;
  const PreferenceDataset data = LabelPreferences(pool, game, lc);
  EXPECT_EQ(data.meta.label_mode, "raw");
  ASSERT_EQ(data.meta.warnings.size(), 1u);
  EXPECT_NE(data.meta.warnings[0].find("zero return variance"), std::string::npos);
  EXPECT_EQ(data.pairs.size(), 50u);
}

TEST(LabelTest, SequenceReturnsUseMeanRewards) {
  const MarkovGame game = OneArmedGame();
  const StepSequence seq = ToSequence(Fixed(0));
  EXPECT_EQ(SequenceReturns(game, seq), std::vector<double>{1.0});
  EXPECT_EQ(seq.states, (std::vector<int>{0, 0}));
}

TEST(LabelModeTest, NamesRoundTrip) {
  for (LabelMode m : {LabelMode::kRaw, LabelMode::kStandardized}) {
    EXPECT_EQ(ParseLabelMode(LabelModeName(m)), m);
  }
  EXPECT_THROW(ParseLabelMode("loud"), ConfigError);
}

TEST(IndependentPairsTest, CounterexampleBehaviorStaysOnSupport) {
  const Counterexample ce = BuildCounterexample();
  const TrajectoryPool pool = CollectIndependentPairs(ce.m1, ce.behavior, 500, 9);
  EXPECT_EQ(pool.pairs.size(), 500u);
  for (const Trajectory& t : pool.trajectories) {
    EXPECT_TRUE(t.joint_actions[0] == 0 || t.joint_actions[0] == 3);
  }
}

}  // namespace
}  // namespace marlhf
