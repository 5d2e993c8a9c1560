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

#ifndef MARLHF_REWARD_MODEL_H_
#define MARLHF_REWARD_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "marlhf/dataset.h"
#include "marlhf/game.h"

namespace marlhf {

// Input encoding for r_phi,i(s, a_i). Grid games get one cell one-hot per
// agent; everything else a state one-hot. Both append the own-action one-hot.
class StateActionEncoder {
 public:
  StateActionEncoder() = default;
  // Reads only the shape and the grid metadata, never rewards.
  explicit StateActionEncoder(const MarkovGame& game);

  int input_dim() const { return state_dim_ + max_actions_; }
  int num_states() const { return num_states_; }
  const std::vector<int>& action_counts() const { return action_counts_; }
  // The encoding is binary; writes the indices of its ones.
  void Hot(int s, int own_action, std::vector<int>& out) const;

  std::string kind() const { return grid_ ? "grid" : "state"; }

 private:
  friend class PracticalRewardModel;

  bool grid_ = false;
  int num_states_ = 0;
  int state_dim_ = 0;
  int max_actions_ = 0;
  std::vector<int> action_counts_;
  std::vector<int> active_;  // [s * k + j]: hot coordinates of state s
  int active_per_state_ = 0;
};

// Two ReLU hidden layers and a scalar output, fed binary inputs given as the
// list of hot coordinates.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int input_dim, int hidden, std::uint64_t seed);

  int input_dim() const { return in_; }
  int hidden() const { return hidden_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<const double> params() const { return params_; }
  std::span<double> mutable_params() { return params_; }

  double Forward(std::span<const int> hot) const;
  // Adds output_grad * d(output)/d(params) into grad.
  void Backward(std::span<const int> hot, double output_grad,
                std::span<double> grad) const;

 private:
  // Offsets into params_: W1 stored transposed (in x hidden) so a hot input
  // selects one contiguous row, b1, W2 (hidden x hidden), b2, w3 (hidden), b3.
  std::size_t w1() const { return 0; }
  std::size_t b1() const { return w1() + static_cast<std::size_t>(hidden_) * in_; }
  std::size_t w2() const { return b1() + hidden_; }
  std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden_) * hidden_; }
  std::size_t w3() const { return b2() + hidden_; }
  std::size_t b3() const { return w3() + hidden_; }

  int in_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

struct RewardModelConfig {
  double alpha = 1.0;
  int hidden = 64;
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.1;
  double degeneracy_threshold = 0.55;
  std::uint64_t seed = 0;
};

struct EpochLog {
  int epoch = 0;
  int player = 0;
  double nll = 0.0;
  double mse = 0.0;
  double loss = 0.0;
  double variance = 0.0;
};

struct RewardModelMetrics {
  double train_nll = 0.0;          // mean over players, pure preference NLL
  double holdout_accuracy = 0.0;   // ties count 1/2
  double smoothness = 0.0;         // mean over held-out trajectories and
                                   // players of sum_h (z_{h+1} - z_h)^2, z the
                                   // per-player standardized prediction
  bool degenerate = false;         // holdout_accuracy <= threshold
  int train_pairs = 0;
  int holdout_pairs = 0;
};

class PracticalRewardModel {
 public:
  PracticalRewardModel() = default;

  int num_players() const { return static_cast<int>(nets_.size()); }
  const StateActionEncoder& encoder() const { return encoder_; }
  const RewardModelConfig& config() const { return config_; }
  const RewardModelMetrics& metrics() const { return metrics_; }
  const std::vector<EpochLog>& log() const { return log_; }
  // Training-pool statistics of each player's raw output.
  double mean(int i) const { return mean_[i]; }
  double variance(int i) const { return variance_[i]; }
  // Pair indices held out from training.
  const std::vector<int>& holdout() const { return holdout_; }

  double Predict(int player, int s, int own_action) const;
  // (r_phi,i - E_i) / sqrt(Var_i); a zero variance divides by 1.
  double StandardizedPlayer(int player, int s, int own_action) const;
  // r_std(s, a) = sum_i StandardizedPlayer(i, s, a_i).
  double Standardized(const GameShape& shape, int s, int joint) const;

  std::string ToJson(const std::string& config_hash) const;
  static PracticalRewardModel FromJson(const std::string& text);

  friend PracticalRewardModel TrainPracticalReward(
      const PreferenceDataset& dataset, const StateActionEncoder& encoder,
      const RewardModelConfig& config);
  // Applies out = scale * out + shift to every player's raw output; used to
  // check that standardization removes affine changes.
  PracticalRewardModel AffineTransformed(double scale, double shift) const;

 private:
  StateActionEncoder encoder_;
  RewardModelConfig config_;
  std::vector<Mlp> nets_;
  std::vector<double> mean_;
  std::vector<double> variance_;
  std::vector<double> out_scale_;  // affine output adjustments, default 1/0
  std::vector<double> out_shift_;
  RewardModelMetrics metrics_;
  std::vector<EpochLog> log_;
  std::vector<int> holdout_;
};

// Minimizes, per player, the preference NLL of summed per-step predictions
// plus (alpha / Var_D) * mean over pairs of the squared step-to-step change
// along both trajectories. Var_D is recomputed at the start of each epoch and
// treated as a constant. Adam on mini-batches; deterministic per seed.
// Throws NumericalError naming the epoch on a non-finite loss.
PracticalRewardModel TrainPracticalReward(const PreferenceDataset& dataset,
                                          const StateActionEncoder& encoder,
                                          const RewardModelConfig& config);

// MSE between standardized team predictions r_std and the standardized
// ground-truth team reward sum_i r_i over every step of the probe sequences.
double RewardMseMetric(const PracticalRewardModel& model,
                       const MarkovGame& oracle,
                       std::span<const StepSequence> probe);

// Mean of (x - y)^2 after standardizing x and y over their entries (a zero
// spread divides by 1).
double StandardizedMse(std::span<const double> x, std::span<const double> y);

// Probe sequences: both trajectories of the model's held-out pairs.
std::vector<StepSequence> HoldoutSequences(const PracticalRewardModel& model,
                                           const PreferenceDataset& dataset);

}  // namespace marlhf

#endif  // MARLHF_REWARD_MODEL_H_
