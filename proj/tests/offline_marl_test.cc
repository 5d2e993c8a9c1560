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


#include "marlhf/offline_marl.h"

#include <cmath>

#include <gtest/gtest.h>

#include "test_util.h"

namespace marlhf {
namespace {

StepSequence Seq(std::vector<int> states, std::vector<int> actions) {
  return {std::move(states), std::move(actions)};
}

PreferenceDataset FromSequences(const std::vector<StepSequence>& seqs) {
  PreferenceDataset d;
  for (std::size_t k = 0; k + 1 < seqs.size(); k += 2) {
    d.pairs.push_back({seqs[k], seqs[k + 1], {1}, "a", "b"});
  }
  return d;
}

// One agent, two states, action a moves to state a; the reward prefers
// reaching state 1 early and staying there.
MarkovGame ChainGame() {
  GameData data;
  data.name = "chain";
  data.shape = GameShape(1, 3, 2, {2});
  for (int h = 0; h < 3; ++h) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        std::vector<double> row(2, 0.0);
        row[a] = 1.0;
        data.AppendRow(row);
        data.reward_mean.push_back(s == 1 && a == 1 ? 1.0 : (a == 0 ? 0.3 : 0.0));
      }
    }
  }
  return MarkovGame(std::move(data));
}

TEST(ReferenceTest, LaplaceSmoothing) {
  const GameShape shape(1, 1, 2, {3});
  std::vector<StepSequence> seqs(100, Seq({0, 0}, {2}));
  const ReferencePolicy ref = FitReference(FromSequences(seqs), shape, 1.0);
  EXPECT_EQ(ref.Count(0, 0, 0, 2), 100);
  EXPECT_DOUBLE_EQ(ref.Prob(0, 0, 0, 2), 101.0 / 103.0);
  EXPECT_DOUBLE_EQ(ref.Prob(0, 0, 0, 0), 1.0 / 103.0);
  EXPECT_EQ(ref.Argmax(0, 0, 0), 2);
  // State 1 was never visited.
  for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(ref.Prob(0, 0, 1, a), 1.0 / 3.0);
}

TEST(ReferenceTest, CountsAreFactorizedPerAgent) {
  const GameShape shape(2, 1, 1, {2, 3});
  // Joint 5 = (1, 2) and joint 0 = (0, 0).
  const ReferencePolicy ref =
      FitReference(FromSequences({Seq({0, 0}, {5}), Seq({0, 0}, {0})}), shape, 1.0);
  EXPECT_EQ(ref.Count(0, 0, 0, 1), 1);
  EXPECT_EQ(ref.Count(0, 1, 0, 2), 1);
  EXPECT_EQ(ref.Count(0, 1, 0, 1), 0);
  EXPECT_DOUBLE_EQ(ref.Prob(0, 1, 0, 1), 1.0 / 5.0);
}

TEST(ReferenceTest, JsonRoundTrip) {
  const GameShape shape(2, 2, 2, {2, 2});
  const ReferencePolicy ref = FitReference(
      FromSequences({Seq({0, 1, 0}, {3, 1}), Seq({1, 1, 1}, {0, 2})}), shape, 0.5);
  const ReferencePolicy loaded = ReferencePolicy::FromJson(ref.ToJson("x"));
  EXPECT_EQ(loaded.policy(), ref.policy());
  EXPECT_EQ(loaded.kappa(), 0.5);
}

TEST(KlTest, SkewedReferenceValue) {
  // Counts 8 : 0 with kappa 1 give 0.9 on the observed action.
  const GameShape shape(1, 1, 1, {2});
  const ReferencePolicy ref =
      FitReference(FromSequences(std::vector<StepSequence>(8, Seq({0, 0}, {0}))), shape, 1.0);
  EXPECT_NEAR(KlTerm(ref, 0, 0, 0), 0.5878, 1e-4);
  EXPECT_DOUBLE_EQ(KlTerm(ref, 0, 0, 0), std::log(1.8));
  EXPECT_DOUBLE_EQ(KlTerm(ref, 0, 0, 1), std::log(0.2));
  EXPECT_DOUBLE_EQ(ShapedReward(0.25, ref, 2.0, 0, 0, 0), 0.25 + 2.0 * std::log(1.8));
}

TEST(KlTest, UniformReferenceIsZero) {
  const GameShape shape(3, 2, 4, {2, 3, 5});
  const ReferencePolicy ref(shape, 1.0);
  for (int h = 0; h < 2; ++h) {
    for (int s = 0; s < 4; ++s) {
      for (int a = 0; a < shape.num_joint_actions(); ++a) {
        EXPECT_NEAR(KlTerm(ref, h, s, a), 0.0, 1e-15);
      }
    }
  }
}

TEST(FittedQTest, SingleAgentRecoversOptimalPolicy) {
  const MarkovGame game = ChainGame();
  // Every action sequence from both start states.
  std::vector<StepSequence> seqs;
  for (int s0 = 0; s0 < 2; ++s0) {
    for (int code = 0; code < 8; ++code) {
      const int a0 = code & 1, a1 = (code >> 1) & 1, a2 = (code >> 2) & 1;
      seqs.push_back(Seq({s0, a0, a1, a2}, {a0, a1, a2}));
    }
  }
  const PreferenceDataset data = FromSequences(seqs);
  const VdnQ q = FittedQVdn(data, game.shape(), [&](int h, int s, int a) {
    return game.Reward(h, s, a, 0);
  });
  EXPECT_NEAR(q.residual, 0.0, 1e-18);
  const JointPolicy greedy = q.Greedy();
  const TeamSolution best = TeamOptimalPolicy(game);
  EXPECT_NEAR(InitialValues(game, greedy)[0], best.value, 1e-12);
  for (int h = 0; h < 3; ++h) {
    for (int s = 0; s < 2; ++s) {
      for (int a = 0; a < 2; ++a) {
        EXPECT_NEAR(q.Team(h, s, a), best.team_q[(h * 2 + s) * 2 + a], 1e-12);
      }
    }
  }
}

TEST(FittedQTest, AdditiveTeamRewardIsFitExactly) {
  const GameShape shape(2, 1, 1, {2, 3});
  const double f[] = {0.1, 0.7}, g[] = {0.0, 0.2, 0.5};
  std::vector<StepSequence> seqs;
  for (int joint = 0; joint < 6; ++joint) seqs.push_back(Seq({0, 0}, {joint}));
  const VdnQ q = FittedQVdn(FromSequences(seqs), shape, [&](int, int, int joint) {
    return f[shape.ActionOf(joint, 0)] + g[shape.ActionOf(joint, 1)];
  });
  EXPECT_NEAR(q.residual, 0.0, 1e-20);
  for (int joint = 0; joint < 6; ++joint) {
    EXPECT_NEAR(q.Team(0, 0, joint), f[shape.ActionOf(joint, 0)] + g[shape.ActionOf(joint, 1)],
                1e-12);
  }
  EXPECT_NEAR(q.TeamMax(0, 0), 1.2, 1e-12);
  EXPECT_EQ(q.Greedy(), JointPolicy::Constant(shape, 5));
}

TEST(FittedQTest, NonAdditiveTargetLeavesResidual) {
  const GameShape shape(2, 1, 1, {2, 2});
  std::vector<StepSequence> seqs;
  for (int joint = 0; joint < 4; ++joint) seqs.push_back(Seq({0, 0}, {joint}));
  // XOR cannot be written as a sum of per-agent terms.
  const VdnQ q = FittedQVdn(FromSequences(seqs), shape, [&](int, int, int joint) {
    return shape.ActionOf(joint, 0) != shape.ActionOf(joint, 1) ? 1.0 : 0.0;
  });
  EXPECT_NEAR(q.residual, 1.0, 1e-12);
}

TEST(FittedQTest, UnseenStatesAndActionsUseTheFloor) {
  const GameShape shape(2, 1, 2, {3, 2});
  // Only joint (0, 0) and (1, 0) in state 0; state 1 never visited.
  const VdnQ q = FittedQVdn(FromSequences({Seq({0, 0}, {0}), Seq({0, 0}, {2})}), shape,
                            [&](int, int, int joint) { return joint == 0 ? 0.4 : 0.8; },
                            VdnConfig{-1.0});
  for (int a = 0; a < 3; ++a) EXPECT_DOUBLE_EQ(q.At(0, 0, 1, a), -0.5);
  // Agent 0's action 2 and agent 1's action 1 are unseen.
  EXPECT_DOUBLE_EQ(q.At(0, 0, 0, 2), -1.0);
  EXPECT_DOUBLE_EQ(q.At(0, 1, 0, 1), -1.0);
  EXPECT_NEAR(q.Team(0, 0, 0), 0.4, 1e-12);
  EXPECT_NEAR(q.Team(0, 0, 2), 0.8, 1e-12);
}

TEST(FittedQTest, DeterministicForFixedInputs) {
  const MarkovGame game = BuildGridSpread({2, 3, 3});
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 200, 5);
  const StepReward reward = [&](int h, int s, int a) { return game.Reward(h, s, a, 0); };
  const VdnQ a = FittedQVdn(data, game.shape(), reward);
  const VdnQ b = FittedQVdn(data, game.shape(), reward);
  EXPECT_EQ(a.ToJson("x"), b.ToJson("x"));
}

// With the true team reward and every (h, s, a) in the data, the greedy
// policy of the fitted tables is an equilibrium of the cooperative game.
TEST(FittedQTest, GroundTruthWithFullCoverageGivesEquilibrium) {
  const MarkovGame game = BuildGridSpread({2, 2, 2});
  const int H = game.horizon(), S = game.num_states(), A = game.num_joint_actions();
  // Joint action 0 keeps both agents still, so s -> s is a valid step.
  std::vector<StepSequence> seqs;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        StepSequence seq;
        seq.states.assign(H + 1, s);
        seq.joint_actions.assign(H, 0);
        seq.joint_actions[h] = a;
        int cur = s;
        for (int k = h; k < H; ++k) {
          seq.states[k] = cur;
          cur = game.Next(k, cur, seq.joint_actions[k])[0].next_state;
        }
        seq.states[H] = cur;
        seqs.push_back(std::move(seq));
      }
    }
  }
  if (seqs.size() % 2) seqs.push_back(seqs.back());
  const VdnQ q = FittedQVdn(FromSequences(seqs), game.shape(), [&](int h, int s, int a) {
    return game.Reward(h, s, a, 0) + game.Reward(h, s, a, 1);
  });
  EXPECT_LE(NashGap(game, q.Greedy()).total_gap, 1e-6);
}

TEST(FittedQTest, EmptyDatasetIsRejected) {
  EXPECT_THROW(FittedQVdn(PreferenceDataset{}, GameShape(1, 1, 1, {2}),
                          [](int, int, int) { return 0.0; }),
               ConfigError);
}

TEST(FittedQTest, JsonRoundTrip) {
  const MarkovGame game = ChainGame();
  const VdnQ q = FittedQVdn(FromSequences({Seq({0, 1, 1, 0}, {1, 1, 0}),
                                           Seq({1, 0, 1, 1}, {0, 1, 1})}),
                            game.shape(), [&](int h, int s, int a) { return game.Reward(h, s, a, 0); });
  const VdnQ loaded = VdnQ::FromJson(q.ToJson("x"));
  EXPECT_EQ(loaded.Greedy(), q.Greedy());
  EXPECT_EQ(loaded.At(1, 0, 1, 1), q.At(1, 0, 1, 1));
}

TEST(AgreementTest, CountsVisitedCellsOnly) {
  const GameShape shape(1, 1, 3, {2});
  const ReferencePolicy ref =
      FitReference(FromSequences({Seq({0, 0}, {1}), Seq({1, 0}, {0})}), shape, 1.0);
  EXPECT_EQ(ReferenceAgreement(JointPolicy::Constant(shape, 1), ref), 1);
  EXPECT_EQ(ReferenceAgreement(JointPolicy::Constant(shape, 0), ref), 1);
  std::vector<int> choice = {1, 0, 1};
  EXPECT_EQ(ReferenceAgreement(JointPolicy::Deterministic(shape, choice), ref), 2);
}

TEST(EvaluateTest, ExactMatchesDpAndMonteCarloIsConsistent) {
  const MarkovGame game = BuildGridSpread({2, 3, 4});
  const JointPolicy pi = JointPolicy::Uniform(game.shape());
  const PolicyEvaluation eval = EvaluatePolicy(game, pi, 4000, 3);
  const auto dp = InitialValues(game, pi);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(eval.exact_return[i], dp[i], 1e-9);
    EXPECT_NEAR(eval.mc_return[i], dp[i], 3.0 * eval.mc_stderr[i] + 1e-12);
  }
  EXPECT_DOUBLE_EQ(eval.MeanReturn(), 0.5 * (dp[0] + dp[1]));
  EXPECT_NEAR(eval.nash_gap.total_gap, NashGap(game, pi).total_gap, 1e-12);
}

TEST(EvaluateTest, StandardErrorScalesWithInverseRoot) {
  const MarkovGame game = BuildGridSpread({2, 3, 4});
  const JointPolicy pi = JointPolicy::Uniform(game.shape());
  const double se_small = EvaluatePolicy(game, pi, 1000, 1).mc_stderr[0];
  const double se_large = EvaluatePolicy(game, pi, 16000, 1).mc_stderr[0];
  EXPECT_NEAR(se_small / se_large, 4.0, 0.4);
}

TEST(EvaluateTest, DeterministicPerSeed) {
  const MarkovGame game = BuildGridSpread({2, 3, 3});
  const JointPolicy pi = JointPolicy::Uniform(game.shape());
  const PolicyEvaluation a = EvaluatePolicy(game, pi, 500, 9);
  const PolicyEvaluation b = EvaluatePolicy(game, pi, 500, 9);
  EXPECT_EQ(a.mc_return, b.mc_return);
  EXPECT_EQ(a.mc_stderr, b.mc_stderr);
  EXPECT_NE(a.mc_return, EvaluatePolicy(game, pi, 500, 10).mc_return);
}

}  // namespace
}  // namespace marlhf
