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

#ifndef MARLHF_THEORY_H_
#define MARLHF_THEORY_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "marlhf/coverage.h"
#include "marlhf/dataset.h"
#include "marlhf/game.h"
#include "marlhf/reward_mle.h"

namespace marlhf {

struct TheoryConfig {
  double delta = 0.05;
  double lambda = 1.0;
  double c_p = 0.1;  // transition bonus constant; the reward radius comes
                     // with the RewardEstimate
  std::int64_t max_candidates = 1'000'000;
};

// C d H sqrt(log(2 d N H / delta)), N the number of transition samples.
double TransitionBonusConstant(double c, int dim, std::int64_t num_samples,
                               int horizon, double delta);

enum class ValueKind { kPessimistic, kOptimisticBestResponse };

struct ValueEstimate {
  ValueKind kind = ValueKind::kPessimistic;
  int player = 0;
  int horizon = 0;
  int num_states = 0;
  int num_joint = 0;
  int dim = 0;
  std::vector<double> v;  // [h * S + s], h = 0..H (row H is zero)
  std::vector<double> q;  // [(h * S + s) * |A| + a]
  std::vector<double> w;  // [h * d + k]
  // Optimistic best response only: player's maximizing action per (h, s),
  // [h * S + s].
  std::vector<int> best_action;

  double Initial(int initial_state) const { return v[initial_state]; }
  double Q(int h, int s, int a) const {
    return q[(static_cast<std::size_t>(h) * num_states + s) * num_joint + a];
  }
};

// Transition samples seen at one step, grouped by (s, a).
struct SampleGroup {
  int state = 0;
  int joint_action = 0;
  int count = 0;
  std::vector<std::pair<int, int>> next_counts;  // (s', count)
  std::vector<double> reward_lower;  // per player
  std::vector<double> reward_upper;
};

// Everything the pessimistic / optimistic recursions need, precomputed once
// per (dataset, estimate). Both trajectories of every pair contribute
// transition samples, so N = 2 * pairs.
class TheoryContext {
 public:
  TheoryContext(const PreferenceDataset& dataset,
                const LinearParameterization& features,
                const CovarianceSet& covariances,
                const RewardEstimate& reward_estimate,
                const TheoryConfig& config);

  int horizon() const { return horizon_; }
  int num_players() const { return num_players_; }
  std::int64_t num_samples() const { return num_samples_; }
  double transition_constant() const { return c_p_; }
  double reward_radius() const { return reward_->confidence_radius; }
  const std::vector<SampleGroup>& samples(int h) const { return samples_[h]; }
  // ||psi(s,a)||_{(Sigma^P_h)^-1}
  double TransitionBonus(int h, int s, int a) const {
    return transition_bonus_[Index(h, s, a)];
  }

  // Value estimation with pessimistic rewards and a subtracted bonus.
  ValueEstimate PessimisticValue(const JointPolicy& policy, int player) const;
  // Best-response estimation with optimistic rewards and an added bonus;
  // player's own component of `others` is ignored.
  ValueEstimate OptimisticBestResponse(const JointPolicy& others,
                                       int player) const;
  // sum_i [Vbar^{dagger, pi_{-i}}_{1,i}(s_1) - Vunder^pi_{1,i}(s_1)]
  double Surrogate(const JointPolicy& policy, int initial_state) const;

  // Per-(h, s, a) bonuses scaled by the constants: reward part
  // C_r ||lift||_{Sigma~^-1}, transition part C_P ||psi||_{(Sigma^P_h)^-1}.
  BonusTable ScaledBonuses() const;

 private:
  std::size_t Index(int h, int s, int a) const {
    return (static_cast<std::size_t>(h) * num_states_ + s) * num_joint_ + a;
  }
  // w_h from regression targets count * reward + sum next_count * v_next.
  std::vector<double> Regress(int h, int player, bool optimistic,
                              std::span<const double> v_next) const;

  const LinearParameterization* features_;
  const CovarianceSet* covariances_;
  const RewardEstimate* reward_;
  int horizon_ = 0;
  int num_states_ = 0;
  int num_joint_ = 0;
  int num_players_ = 0;
  int dim_ = 0;
  std::int64_t num_samples_ = 0;
  double c_p_ = 0.0;
  std::vector<std::vector<SampleGroup>> samples_;
  std::vector<double> transition_bonus_;
};

struct SurrogateResult {
  JointPolicy policy;
  double surrogate = 0.0;
  std::int64_t candidate_index = 0;
  std::int64_t num_candidates = 0;
};

// Number of deterministic Markov product policies on the shape.
std::int64_t DeterministicPolicyCount(const GameShape& shape,
                                      std::int64_t cap);

// Argmin of the surrogate over all deterministic product policies, enumerated
// lexicographically in the choice vector [(h * m + i) * S + s] (last entry
// fastest). Ties keep the earliest candidate. Throws SizingError above
// config.max_candidates. With `trace`, writes one CSV row per candidate.
SurrogateResult SurrogateMinimize(const TheoryContext& context,
                                  const GameShape& shape, int initial_state,
                                  const TheoryConfig& config,
                                  std::ostream* trace = nullptr);
SurrogateResult SurrogateMinimize(const TheoryContext& context,
                                  std::span<const JointPolicy> candidates,
                                  int initial_state,
                                  std::ostream* trace = nullptr);

// sum_i max_{pi_i} 4 E_{pi_i, pi*_{-i}}[sum_h (C_P ||psi||_{(Sigma^P_h)^-1} +
// C_r ||lift||_{Sigma~^-1})]: the right-hand side of the unilateral-coverage
// gap bound, summed over players as in its derivation.
double UnilateralBound(const TheoryContext& context, const MarkovGame& game,
                       const JointPolicy& pi_star);

}  // namespace marlhf

#endif  // MARLHF_THEORY_H_
