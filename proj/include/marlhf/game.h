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

#ifndef MARLHF_GAME_H_
#define MARLHF_GAME_H_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "marlhf/common.h"
#include "marlhf/linalg.h"

namespace marlhf {

// Dimensions shared by games and policies. Steps are 0-based internally
// (h = 0..H-1); the terminal value slot is h = H.
//
// Joint actions are encoded mixed-radix with player 0 most significant, so for
// two players with two actions each the order is (0,0), (0,1), (1,0), (1,1).
class GameShape {
 public:
  GameShape() = default;
  GameShape(int num_players, int horizon, int num_states,
            std::vector<int> action_counts);

  int num_players() const { return num_players_; }
  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_actions(int player) const { return action_counts_[player]; }
  const std::vector<int>& action_counts() const { return action_counts_; }
  int num_joint_actions() const { return num_joint_; }

  int Encode(std::span<const int> actions) const;
  void Decode(int joint, std::span<int> actions) const;
  int ActionOf(int joint, int player) const {
    return (joint / stride_[player]) % action_counts_[player];
  }
  // Joint index with player's component replaced by `action`.
  int Replace(int joint, int player, int action) const {
    return joint + (action - ActionOf(joint, player)) * stride_[player];
  }

  bool operator==(const GameShape& other) const = default;

 private:
  int num_players_ = 0;
  int horizon_ = 0;
  int num_states_ = 0;
  int num_joint_ = 0;
  std::vector<int> action_counts_;
  std::vector<int> stride_;
};

// Linear feature model: P_h(s'|s,a) = <psi(s,a), mu_h(s')> and
// r_{h,i}(s,a) = <psi(s,a), theta_{h,i}>.
class LinearParameterization {
 public:
  enum class Kind { kDense, kOneHot };

  LinearParameterization() = default;

  // psi: [state][joint][dim], mu: [h][next_state][dim], theta: [h][player][dim].
  static LinearParameterization Dense(const GameShape& shape, int dim,
                                      std::vector<double> psi,
                                      std::vector<double> mu,
                                      std::vector<double> theta);
  // psi(s,a) = e_{s*|A| + a}; mu and theta follow the dense layouts above.
  static LinearParameterization OneHot(const GameShape& shape,
                                       std::vector<double> mu,
                                       std::vector<double> theta);

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  int horizon() const { return horizon_; }
  int num_states() const { return num_states_; }
  int num_joint_actions() const { return num_joint_; }
  int num_players() const { return num_players_; }

  // Nonzero entries of psi(s,a).
  std::span<const int> PsiIndex(int s, int a) const;
  std::span<const double> PsiValue(int s, int a) const;
  SparseVector Psi(int s, int a) const;
  std::vector<double> PsiDense(int s, int a) const;
  // One-hot lift into R^{H d}: psi(s,a) placed in block h.
  SparseVector Lift(int h, int s, int a) const;

  std::span<const double> Mu(int h, int next_state) const;
  std::span<const double> Theta(int h, int player) const;
  // <psi(s,a), v> for a dense d-vector v.
  double Inner(int s, int a, std::span<const double> v) const;

  const std::vector<double>& psi_dense() const { return psi_; }
  const std::vector<double>& mu() const { return mu_; }
  const std::vector<double>& theta() const { return theta_; }

  bool operator==(const LinearParameterization& other) const;

 private:
  void BuildSparse();

  Kind kind_ = Kind::kDense;
  int dim_ = 0;
  int horizon_ = 0;
  int num_states_ = 0;
  int num_joint_ = 0;
  int num_players_ = 0;
  std::vector<double> psi_;  // empty for kOneHot
  std::vector<double> mu_;
  std::vector<double> theta_;
  std::vector<int> nz_offsets_;
  std::vector<int> nz_index_;
  std::vector<double> nz_value_;
};

enum class RewardNoise { kNone, kBernoulli };

struct Transition {
  int next_state;
  double prob;
  bool operator==(const Transition&) const = default;
};

// Everything needed to build a MarkovGame. Transition rows are stored sparse:
// row (h * S + s) * |A| + a spans
// [row_offsets[row], row_offsets[row + 1]) of `transitions`.
struct GameData {
  std::string name;
  GameShape shape;
  int initial_state = 0;
  std::vector<int> row_offsets;
  std::vector<Transition> transitions;
  // [((h * S + s) * |A| + a) * m + i]
  std::vector<double> reward_mean;
  RewardNoise reward_noise = RewardNoise::kNone;
  std::optional<LinearParameterization> features;
  std::map<std::string, std::string> metadata;

  // Appends the next transition row, dropping zero entries.
  void AppendRow(std::span<const double> dense_row);
  void AppendRow(std::span<const Transition> row);
};

class MarkovGame {
 public:
  // Validates all invariants; throws ConfigError on violation.
  explicit MarkovGame(GameData data);

  const std::string& name() const { return data_.name; }
  const GameShape& shape() const { return data_.shape; }
  int num_players() const { return data_.shape.num_players(); }
  int horizon() const { return data_.shape.horizon(); }
  int num_states() const { return data_.shape.num_states(); }
  int num_joint_actions() const { return data_.shape.num_joint_actions(); }
  int num_actions(int i) const { return data_.shape.num_actions(i); }
  int initial_state() const { return data_.initial_state; }
  RewardNoise reward_noise() const { return data_.reward_noise; }

  std::span<const Transition> Next(int h, int s, int a) const {
    const int row = Row(h, s, a);
    return {data_.transitions.data() + data_.row_offsets[row],
            data_.transitions.data() + data_.row_offsets[row + 1]};
  }
  double Reward(int h, int s, int a, int i) const {
    return data_.reward_mean[static_cast<std::size_t>(Row(h, s, a)) *
                                 num_players() + i];
  }
  std::span<const double> Rewards(int h, int s, int a) const {
    return {data_.reward_mean.data() +
                static_cast<std::size_t>(Row(h, s, a)) * num_players(),
            static_cast<std::size_t>(num_players())};
  }

  bool has_features() const { return data_.features.has_value(); }
  const LinearParameterization& features() const;
  const std::map<std::string, std::string>& metadata() const {
    return data_.metadata;
  }
  const GameData& data() const { return data_; }

 private:
  int Row(int h, int s, int a) const {
    return (h * num_states() + s) * num_joint_actions() + a;
  }

  GameData data_;
};

// Product policy: per (h, i) a row-major |S| x |A_i| table.
class JointPolicy {
 public:
  JointPolicy() = default;
  // Uniform over every action set.
  explicit JointPolicy(const GameShape& shape);

  static JointPolicy Uniform(const GameShape& shape) {
    return JointPolicy(shape);
  }
  // choice[(h * m + i) * S + s] is the action taken.
  static JointPolicy Deterministic(const GameShape& shape,
                                   std::span<const int> choice);
  // Point mass on one joint action at every (h, s).
  static JointPolicy Constant(const GameShape& shape, int joint_action);

  const GameShape& shape() const { return shape_; }

  std::span<const double> Row(int h, int i, int s) const;
  std::span<double> MutableRow(int h, int i, int s);
  double Prob(int h, int i, int s, int action) const {
    return Row(h, i, s)[action];
  }
  // Probability of the joint action under the product.
  double JointProb(int h, int s, int joint) const;
  // Fills out[a] = JointProb(h, s, a) for all joint actions.
  void JointDistribution(int h, int s, std::span<double> out) const;
  // Same, but with player i's factor removed (i.e. marginal over the others).
  void OthersDistribution(int h, int s, int i, std::span<double> out) const;

  // Copy of this policy with player i's component taken from `source`.
  JointPolicy WithPlayer(int i, const JointPolicy& source) const;

  // Throws ConfigError if any row is not a distribution.
  void Validate(double tol = 1e-9) const;
  bool IsDeterministic() const;
  // Argmax action (lowest index on ties).
  int Greedy(int h, int i, int s) const;

  bool operator==(const JointPolicy& other) const = default;

 private:
  GameShape shape_;
  std::vector<std::vector<double>> tables_;  // index h * m + i
};

struct Trajectory {
  std::vector<int> states;         // H + 1 entries
  std::vector<int> joint_actions;  // H entries
  // Oracle-only per-step realized rewards, [h * m + i].
  std::optional<std::vector<double>> realized_rewards;
  // Concatenation [psi(s_1,a_1), ..., psi(s_H,a_H)] in R^{H d}.
  std::optional<std::vector<double>> feature_sum;
};

// Samples one episode. Fills realized_rewards always and feature_sum when the
// game carries features.
Trajectory Rollout(const MarkovGame& game, const JointPolicy& policy, Rng& rng);
// Lighter sampler used by Monte-Carlo loops: only states and actions.
void SampleEpisode(const MarkovGame& game, const JointPolicy& policy, Rng& rng,
                   std::span<int> states, std::span<int> joint_actions);
// Draws an index from a discrete distribution (tolerates round-off).
int SampleIndex(std::span<const double> probs, Rng& rng);

// Episode-level mixture of product policies: one component is drawn per
// episode. Needed for correlated behavior such as the counterexample's, which
// puts mass on (a1,b1) and (a2,b2) only.
struct PolicyMixture {
  std::vector<double> weights;
  std::vector<JointPolicy> components;

  // Marginal probability of a joint action at step h in state s, assuming
  // the component posterior equals the prior (exact at h = 0).
  double JointProb(int h, int s, int joint) const;
};
Trajectory Rollout(const MarkovGame& game, const PolicyMixture& behavior,
                   Rng& rng);

// V^pi_{h,i}(s) for h = 0..H (terminal row zero).
class ValueTable {
 public:
  ValueTable() = default;
  ValueTable(int horizon, int num_states, int num_players)
      : horizon_(horizon),
        num_states_(num_states),
        num_players_(num_players),
        v_(static_cast<std::size_t>(horizon + 1) * num_states * num_players,
           0.0) {}

  double& At(int h, int s, int i) {
    return v_[(static_cast<std::size_t>(h) * num_states_ + s) * num_players_ +
              i];
  }
  double At(int h, int s, int i) const {
    return v_[(static_cast<std::size_t>(h) * num_states_ + s) * num_players_ +
              i];
  }
  int horizon() const { return horizon_; }

 private:
  int horizon_ = 0;
  int num_states_ = 0;
  int num_players_ = 0;
  std::vector<double> v_;
};

ValueTable ExactValues(const MarkovGame& game, const JointPolicy& policy);
// Per-player value at the initial state.
std::vector<double> InitialValues(const MarkovGame& game,
                                  const JointPolicy& policy);
// State occupancy d_h(s) under the policy, [h * S + s], h = 0..H-1.
std::vector<double> StateOccupancy(const MarkovGame& game,
                                   const JointPolicy& policy);

// Builders.
struct Counterexample {
  MarkovGame m1;
  MarkovGame m2;
  PolicyMixture behavior;
};
Counterexample BuildCounterexample();

struct RandomLinearGameParams {
  int num_players = 2;
  int horizon = 2;
  int num_states = 2;
  std::vector<int> action_counts = {2, 2};
  int dim = 4;
  std::uint64_t seed = 0;
};
MarkovGame BuildRandomLinearGame(const RandomLinearGameParams& params);

struct GridSpreadParams {
  int num_agents = 2;
  int grid_size = 3;
  int horizon = 5;
  // Attach one-hot features when |S||A| * |S| * H stays below this many
  // doubles; set 0 to never attach.
  std::int64_t feature_budget = 20'000'000;
};
MarkovGame BuildGridSpread(const GridSpreadParams& params);

// Decodes a grid-spread state into per-agent cell indices (row * g + col).
std::vector<int> GridCells(const MarkovGame& game, int state);

// One-hot parameterization of an arbitrary tabular game.
LinearParameterization OneHotFeatures(const MarkovGame& game);
// One-hot with an anchor coordinate: psi(s,a) = [c, r e_{s|A|+a}],
// c = r = 1/sqrt(2), and zero reward weight on the anchor. Per-step reward
// offsets are then pinned to zero instead of being unidentifiable from
// trajectory comparisons.
LinearParameterization AnchoredOneHotFeatures(const MarkovGame& game);

// Structured document round trip.
std::string SaveGameJson(const MarkovGame& game);
MarkovGame LoadGameJson(const std::string& text);

std::string SavePolicyJson(const JointPolicy& policy);
JointPolicy LoadPolicyJson(const std::string& text);

}  // namespace marlhf

#endif  // MARLHF_GAME_H_
