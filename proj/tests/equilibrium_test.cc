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


#include "marlhf/equilibrium.h"

#include <algorithm>
#include <array>
#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"

namespace marlhf {
namespace {

constexpr int kA1B1 = 0, kA2B2 = 3;

// One-step two-player 2x2 game; player 0 receives total - u[a], player 1 u[a].
MarkovGame ConstantSum2x2(const std::array<double, 4>& u, double total = 1.0) {
  return testing::UniformTransitionGame(
      2, 1, 1, {2, 2},
      [&](int, int, int a, int i) { return i == 1 ? u[a] : total - u[a]; });
}

TEST(BestResponseTest, ZeroRewardGivesZero) {
  const MarkovGame game = testing::UniformTransitionGame(
      3, 2, 3, {2, 2, 3}, [](int, int, int, int) { return 0.0; });
  const JointPolicy pi = JointPolicy::Uniform(game.shape());
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(BestResponseValue(game, pi, i).value, 0.0);
  }
}

TEST(BestResponseTest, CounterexampleAgainstUniformOpponent) {
  const Counterexample ce = BuildCounterexample();
  const JointPolicy uniform = JointPolicy::Uniform(ce.m1.shape());
  const BestResponse br = BestResponseValue(ce.m1, uniform, 1);
  EXPECT_DOUBLE_EQ(br.value, 0.75);
  // The responder plays b1 deterministically; player 0 is untouched.
  EXPECT_DOUBLE_EQ(br.policy.Prob(0, 1, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(br.policy.Prob(0, 0, 0, 0), 0.5);
}

TEST(BestResponseTest, NeverBelowPolicyValueAndMatchesEnumeration) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    RandomLinearGameParams params;
    params.seed = seed;
    params.dim = 3 + static_cast<int>(seed % 4);
    const MarkovGame game = BuildRandomLinearGame(params);
    const JointPolicy pi = JointPolicy::Uniform(game.shape());
    const auto values = InitialValues(game, pi);
    const auto candidates = testing::AllDeterministic(game.shape());
    for (int i = 0; i < 2; ++i) {
      const double br = BestResponseValue(game, pi, i).value;
      EXPECT_GE(br, values[i] - 1e-12);
      double best = -1.0;
      for (const JointPolicy& c : candidates) {
        best = std::max(best, InitialValues(game, pi.WithPlayer(i, c))[i]);
      }
      EXPECT_NEAR(br, best, 1e-9);
    }
  }
}

// Player 0 gets a third action paying half of action 0 (transitions are
// uniform, so it is dominated); the best response cannot change. Removing the
// action chosen at the first step cannot help.
TEST(BestResponseTest, MonotoneInTheActionSet) {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> base(2 * 2 * 4 * 2);
    for (double& r : base) r = Uniform01(rng);
    auto reward = [&](int h, int s, int a0, int a1, int i) {
      return base[((h * 2 + s) * 4 + a0 * 2 + a1) * 2 + i];
    };
    const MarkovGame two = testing::UniformTransitionGame(
        2, 2, 2, {2, 2}, [&](int h, int s, int a, int i) { return reward(h, s, a / 2, a % 2, i); });
    const MarkovGame three = testing::UniformTransitionGame(
        2, 2, 2, {3, 2}, [&](int h, int s, int a, int i) {
          const int a0 = a / 2, a1 = a % 2;
          return a0 == 2 ? 0.5 * reward(h, s, 0, a1, i) : reward(h, s, a0, a1, i);
        });
    const double v2 = BestResponseValue(two, JointPolicy::Uniform(two.shape()), 0).value;
    const double v3 = BestResponseValue(three, JointPolicy::Uniform(three.shape()), 0).value;
    EXPECT_NEAR(v3, v2, 1e-12);

    const BestResponse br = BestResponseValue(three, JointPolicy::Uniform(three.shape()), 0);
    const int chosen = br.policy.Greedy(0, 0, 0);
    // Same game with that action removed everywhere.
    const MarkovGame without = testing::UniformTransitionGame(
        2, 2, 2, {2, 2}, [&](int h, int s, int a, int i) {
          const int a0 = a / 2 >= chosen ? a / 2 + 1 : a / 2;
          return a0 == 2 ? 0.5 * reward(h, s, 0, a % 2, i) : reward(h, s, a0, a % 2, i);
        });
    EXPECT_LE(BestResponseValue(without, JointPolicy::Uniform(without.shape()), 0).value,
              br.value + 1e-12);
  }
}

TEST(NashGapTest, PureEquilibriumHasZeroGap) {
  const Counterexample ce = BuildCounterexample();
  const NashGapReport report =
      NashGap(ce.m1, JointPolicy::Constant(ce.m1.shape(), kA1B1));
  EXPECT_NEAR(report.total_gap, 0.0, 1e-12);
  const NashGapReport m2 =
      NashGap(ce.m2, JointPolicy::Constant(ce.m2.shape(), kA2B2));
  EXPECT_NEAR(m2.total_gap, 0.0, 1e-12);
}

// Against the uniform profile each player gains 0.25 by deviating.
TEST(NashGapTest, UniformProfileInCounterexample) {
  const Counterexample ce = BuildCounterexample();
  const NashGapReport report = NashGap(ce.m1, JointPolicy::Uniform(ce.m1.shape()));
  ASSERT_EQ(report.gap.size(), 2u);
  EXPECT_DOUBLE_EQ(report.gap[0], 0.25);
  EXPECT_DOUBLE_EQ(report.gap[1], 0.25);
  EXPECT_DOUBLE_EQ(report.total_gap, 0.5);
}

TEST(NashGapTest, TotalIsSumAndDominatesEachPlayer) {
  RandomLinearGameParams params;
  params.num_players = 3;
  params.action_counts = {2, 3, 2};
  params.seed = 5;
  const MarkovGame game = BuildRandomLinearGame(params);
  const NashGapReport report = NashGap(game, JointPolicy::Uniform(game.shape()));
  double sum = 0.0;
  for (int i = 0; i < 3; ++i) {
    EXPECT_GE(report.gap[i], 0.0);
    EXPECT_GE(report.total_gap, report.gap[i]);
    EXPECT_DOUBLE_EQ(report.gap[i], std::max(0.0, report.raw_gap[i]));
    sum += report.gap[i];
  }
  EXPECT_DOUBLE_EQ(report.total_gap, sum);
}

TEST(MatrixNashTest, MatchingPenniesIsUniform) {
  // Player 1 wins on a match.
  const MarkovGame game = ConstantSum2x2({1.0, 0.0, 0.0, 1.0});
  const JointPolicy pi = SolveMatrixNash2x2(game);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(pi.Prob(0, i, 0, 0), 0.5, 1e-12);
  }
  EXPECT_NEAR(NashGap(game, pi).total_gap, 0.0, 1e-12);
}

TEST(MatrixNashTest, RandomConstantSumGamesHaveZeroGap) {
  Rng rng(2024);
  for (int k = 0; k < 100; ++k) {
    std::array<double, 4> u;
    for (double& x : u) x = Uniform01(rng);
    const MarkovGame game = ConstantSum2x2(u);
    ASSERT_TRUE(IsConstantSum2x2(game));
    const JointPolicy pi = SolveMatrixNash2x2(game);
    EXPECT_LE(NashGap(game, pi).total_gap, 1e-9) << "game " << k;
  }
}

TEST(MatrixNashTest, RejectsGeneralSumGames) {
  const MarkovGame game = testing::UniformTransitionGame(
      2, 1, 1, {2, 2}, [](int, int, int a, int) { return a == 0 ? 1.0 : 0.0; });
  EXPECT_FALSE(IsConstantSum2x2(game));
  EXPECT_THROW(SolveMatrixNash2x2(game), ConfigError);
}

TEST(TeamOptimalTest, MatchesEnumeration) {
  RandomLinearGameParams params;
  params.seed = 9;
  const MarkovGame game = BuildRandomLinearGame(params);
  const TeamSolution team = TeamOptimalPolicy(game);
  const auto v = InitialValues(game, team.policy);
  EXPECT_NEAR(team.value, v[0] + v[1], 1e-12);
  EXPECT_TRUE(team.policy.IsDeterministic());
  // Joint deterministic policies include all product ones.
  for (const JointPolicy& c : testing::AllDeterministic(game.shape())) {
    const auto w = InitialValues(game, c);
    EXPECT_LE(w[0] + w[1], team.value + 1e-12);
  }
}

TEST(NashGapTest, CsvRowHasOneFieldPerHeaderColumn) {
  const Counterexample ce = BuildCounterexample();
  const NashGapReport report = NashGap(ce.m1, JointPolicy::Uniform(ce.m1.shape()));
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  EXPECT_EQ(count(report.CsvHeader()), count(report.CsvRow()));
}

}  // namespace
}  // namespace marlhf
