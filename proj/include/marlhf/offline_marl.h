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

#ifndef MARLHF_OFFLINE_MARL_H_
#define MARLHF_OFFLINE_MARL_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "marlhf/dataset.h"
#include "marlhf/equilibrium.h"
#include "marlhf/game.h"

namespace marlhf {

// Per-agent behavior cloning by counting, with Laplace smoothing kappa.
class ReferencePolicy {
 public:
  ReferencePolicy() = default;
  ReferencePolicy(const GameShape& shape, double kappa);

  const GameShape& shape() const { return shape_; }
  double kappa() const { return kappa_; }
  void Observe(int h, int s, int joint);
  // Rebuilds the smoothed distributions from the counts.
  void Finalize();

  int Count(int h, int i, int s, int action) const;
  double Prob(int h, int i, int s, int action) const {
    return policy_.Prob(h, i, s, action);
  }
  const JointPolicy& policy() const { return policy_; }
  // Most probable own action, lowest index on ties.
  int Argmax(int h, int i, int s) const { return policy_.Greedy(h, i, s); }

  // Stores the counts; loading replays them through Finalize.
  std::string ToJson(const std::string& config_hash) const;
  static ReferencePolicy FromJson(const std::string& text);

 private:
  GameShape shape_;
  double kappa_ = 1.0;
  std::vector<std::vector<int>> counts_;  // [h * m + i][s * |A_i| + a]
  JointPolicy policy_;
};

ReferencePolicy FitReference(const PreferenceDataset& dataset,
                             const GameShape& shape, double kappa = 1.0);

// sum_i log(|A_i| pi_ref,i(a_i | s)): the KL term after substituting the
// uniform density for the learner's deterministic policy.
double KlTerm(const ReferencePolicy& reference, int h, int s, int joint);
// r_std + beta * KlTerm.
double ShapedReward(double r_std, const ReferencePolicy& reference,
                    double beta, int h, int s, int joint);

// Reward used by the fitted-Q learner at a dataset point (h, s, joint).
using StepReward = std::function<double(int h, int s, int joint)>;

struct VdnConfig {
  // Value of never-observed own actions is min(floor, lowest fitted entry).
  double floor = 0.0;
};

class VdnQ {
 public:
  VdnQ() = default;
  explicit VdnQ(const GameShape& shape);

  const GameShape& shape() const { return shape_; }
  double At(int h, int i, int s, int action) const {
    return tables_[static_cast<std::size_t>(h) * shape_.num_players() + i]
                  [static_cast<std::size_t>(s) * shape_.num_actions(i) + action];
  }
  double& At(int h, int i, int s, int action) {
    return tables_[static_cast<std::size_t>(h) * shape_.num_players() + i]
                  [static_cast<std::size_t>(s) * shape_.num_actions(i) + action];
  }
  // Team value sum_i Q_{h,i}(s, a_i).
  double Team(int h, int s, int joint) const;
  // max over joint actions of Team, which decomposes per agent.
  double TeamMax(int h, int s) const;
  // Per-agent argmax, lowest index on ties.
  JointPolicy Greedy() const;

  // Weighted least-squares residual summed over all fitted (h, s).
  double residual = 0.0;

  std::string ToJson(const std::string& config_hash) const;
  static VdnQ FromJson(const std::string& text);

 private:
  GameShape shape_;
  std::vector<std::vector<double>> tables_;
};

// Backward fitted-Q over the finite horizon. At each observed (h, s) the
// per-agent tables are the weighted minimum-norm least-squares fit of
//   sum_i Q_{h,i}(s, a_i) ~ mean over occurrences of [r + TeamMax_{h+1}(s')]
// across the joint actions seen there. Throws ConfigError on an empty dataset.
VdnQ FittedQVdn(const PreferenceDataset& dataset, const GameShape& shape,
                const StepReward& reward, const VdnConfig& config = {});

// Number of (h, i, s) with at least one dataset visit where the policy's
// greedy action equals the reference argmax.
int ReferenceAgreement(const JointPolicy& policy, const ReferencePolicy& reference);

struct PolicyEvaluation {
  std::vector<double> exact_return;  // per agent, by DP
  std::vector<double> mc_return;     // per agent, Monte Carlo
  std::vector<double> mc_stderr;
  NashGapReport nash_gap;
  // Mean over agents of the exact returns.
  double MeanReturn() const;
};

PolicyEvaluation EvaluatePolicy(const MarkovGame& game,
                                const JointPolicy& policy, int episodes,
                                std::uint64_t seed);

}  // namespace marlhf

#endif  // MARLHF_OFFLINE_MARL_H_
