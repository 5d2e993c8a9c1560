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

#include "marlhf/game.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "marlhf/simd/kernels.h"

namespace marlhf {

namespace {

constexpr double kRowTolerance = 1e-9;
constexpr double kLinearTolerance = 1e-9;
constexpr double kNormSlack = 1e-9;

double Norm(std::span<const double> v) {
  return std::sqrt(simd::Dot(v, v));
}

}  // namespace

GameShape::GameShape(int num_players, int horizon, int num_states,
                     std::vector<int> action_counts)
    : num_players_(num_players),
      horizon_(horizon),
      num_states_(num_states),
      action_counts_(std::move(action_counts)) {
  if (num_players_ < 1) throw ConfigError("need at least one player");
  if (horizon_ < 1) throw ConfigError("horizon must be positive");
  if (num_states_ < 1) throw ConfigError("need at least one state");
  if (static_cast<int>(action_counts_.size()) != num_players_) {
    throw ConfigError("action_counts length must equal the player count");
  }
  stride_.assign(num_players_, 1);
  std::int64_t joint = 1;
  for (int i = num_players_ - 1; i >= 0; --i) {
    if (action_counts_[i] < 1) throw ConfigError("action counts must be >= 1");
    stride_[i] = static_cast<int>(joint);
    joint *= action_counts_[i];
    if (joint > (1 << 24)) throw SizingError("joint action space too large");
  }
  num_joint_ = static_cast<int>(joint);
}

int GameShape::Encode(std::span<const int> actions) const {
  int joint = 0;
  for (int i = 0; i < num_players_; ++i) {
    joint = joint * action_counts_[i] + actions[i];
  }
  return joint;
}

void GameShape::Decode(int joint, std::span<int> actions) const {
  for (int i = num_players_ - 1; i >= 0; --i) {
    actions[i] = joint % action_counts_[i];
    joint /= action_counts_[i];
  }
}

// ---------------------------------------------------------------------------
// LinearParameterization

LinearParameterization LinearParameterization::Dense(
    const GameShape& shape, int dim, std::vector<double> psi,
    std::vector<double> mu, std::vector<double> theta) {
  LinearParameterization p;
  p.kind_ = Kind::kDense;
  p.dim_ = dim;
  p.horizon_ = shape.horizon();
  p.num_states_ = shape.num_states();
  p.num_joint_ = shape.num_joint_actions();
  p.num_players_ = shape.num_players();
  if (dim < 1) throw ConfigError("feature dimension must be >= 1");
  const std::size_t d = dim;
  if (psi.size() != static_cast<std::size_t>(p.num_states_) * p.num_joint_ * d ||
      mu.size() != static_cast<std::size_t>(p.horizon_) * p.num_states_ * d ||
      theta.size() != static_cast<std::size_t>(p.horizon_) * p.num_players_ * d) {
    throw DimensionError("feature arrays do not match the game shape");
  }
  p.psi_ = std::move(psi);
  p.mu_ = std::move(mu);
  p.theta_ = std::move(theta);
  for (double v : p.psi_) {
    if (!std::isfinite(v)) throw NumericalError("non-finite psi entry");
  }
  for (int s = 0; s < p.num_states_; ++s) {
    for (int a = 0; a < p.num_joint_; ++a) {
      std::span<const double> row(
          p.psi_.data() + (static_cast<std::size_t>(s) * p.num_joint_ + a) * d,
          d);
      if (Norm(row) > 1.0 + kNormSlack) {
        throw ConfigError("feature norm exceeds 1");
      }
    }
  }
  p.BuildSparse();
  const double bound = std::sqrt(static_cast<double>(dim)) + kNormSlack;
  for (int h = 0; h < p.horizon_; ++h) {
    for (int s = 0; s < p.num_states_; ++s) {
      if (Norm(p.Mu(h, s)) > bound) throw ConfigError("mu norm exceeds sqrt(d)");
    }
    for (int i = 0; i < p.num_players_; ++i) {
      if (Norm(p.Theta(h, i)) > bound) {
        throw ConfigError("theta norm exceeds sqrt(d)");
      }
    }
  }
  return p;
}

LinearParameterization LinearParameterization::OneHot(
    const GameShape& shape, std::vector<double> mu, std::vector<double> theta) {
  LinearParameterization p;
  p.kind_ = Kind::kOneHot;
  p.horizon_ = shape.horizon();
  p.num_states_ = shape.num_states();
  p.num_joint_ = shape.num_joint_actions();
  p.num_players_ = shape.num_players();
  p.dim_ = p.num_states_ * p.num_joint_;
  const std::size_t d = p.dim_;
  if (mu.size() != static_cast<std::size_t>(p.horizon_) * p.num_states_ * d ||
      theta.size() != static_cast<std::size_t>(p.horizon_) * p.num_players_ * d) {
    throw DimensionError("feature arrays do not match the game shape");
  }
  p.mu_ = std::move(mu);
  p.theta_ = std::move(theta);
  p.BuildSparse();
  return p;
}

void LinearParameterization::BuildSparse() {
  const int rows = num_states_ * num_joint_;
  nz_offsets_.assign(rows + 1, 0);
  nz_index_.clear();
  nz_value_.clear();
  for (int r = 0; r < rows; ++r) {
    if (kind_ == Kind::kOneHot) {
      nz_index_.push_back(r);
      nz_value_.push_back(1.0);
    } else {
      for (int k = 0; k < dim_; ++k) {
        const double v = psi_[static_cast<std::size_t>(r) * dim_ + k];
        if (v != 0.0) {
          nz_index_.push_back(k);
          nz_value_.push_back(v);
        }
      }
    }
    nz_offsets_[r + 1] = static_cast<int>(nz_index_.size());
  }
}

std::span<const int> LinearParameterization::PsiIndex(int s, int a) const {
  const int r = s * num_joint_ + a;
  return {nz_index_.data() + nz_offsets_[r],
          static_cast<std::size_t>(nz_offsets_[r + 1] - nz_offsets_[r])};
}

std::span<const double> LinearParameterization::PsiValue(int s, int a) const {
  const int r = s * num_joint_ + a;
  return {nz_value_.data() + nz_offsets_[r],
          static_cast<std::size_t>(nz_offsets_[r + 1] - nz_offsets_[r])};
}

SparseVector LinearParameterization::Psi(int s, int a) const {
  SparseVector out;
  auto idx = PsiIndex(s, a);
  auto val = PsiValue(s, a);
  out.index.assign(idx.begin(), idx.end());
  out.value.assign(val.begin(), val.end());
  return out;
}

std::vector<double> LinearParameterization::PsiDense(int s, int a) const {
  std::vector<double> out(dim_, 0.0);
  auto idx = PsiIndex(s, a);
  auto val = PsiValue(s, a);
  for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]] = val[k];
  return out;
}

SparseVector LinearParameterization::Lift(int h, int s, int a) const {
  SparseVector out = Psi(s, a);
  for (int& k : out.index) k += h * dim_;
  return out;
}

std::span<const double> LinearParameterization::Mu(int h,
                                                   int next_state) const {
  return {mu_.data() +
              (static_cast<std::size_t>(h) * num_states_ + next_state) * dim_,
          static_cast<std::size_t>(dim_)};
}

std::span<const double> LinearParameterization::Theta(int h,
                                                      int player) const {
  return {theta_.data() +
              (static_cast<std::size_t>(h) * num_players_ + player) * dim_,
          static_cast<std::size_t>(dim_)};
}

double LinearParameterization::Inner(int s, int a,
                                     std::span<const double> v) const {
  auto idx = PsiIndex(s, a);
  auto val = PsiValue(s, a);
  double acc = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) acc += val[k] * v[idx[k]];
  return acc;
}

bool LinearParameterization::operator==(
    const LinearParameterization& other) const {
  return kind_ == other.kind_ && dim_ == other.dim_ &&
         horizon_ == other.horizon_ && num_states_ == other.num_states_ &&
         num_joint_ == other.num_joint_ &&
         num_players_ == other.num_players_ && psi_ == other.psi_ &&
         mu_ == other.mu_ && theta_ == other.theta_;
}

// ---------------------------------------------------------------------------
// GameData / MarkovGame

void GameData::AppendRow(std::span<const double> dense_row) {
  if (row_offsets.empty()) row_offsets.push_back(0);
  for (std::size_t s = 0; s < dense_row.size(); ++s) {
    if (dense_row[s] != 0.0) {
      transitions.push_back({static_cast<int>(s), dense_row[s]});
    }
  }
  row_offsets.push_back(static_cast<int>(transitions.size()));
}

void GameData::AppendRow(std::span<const Transition> row) {
  if (row_offsets.empty()) row_offsets.push_back(0);
  for (const Transition& t : row) {
    if (t.prob != 0.0) transitions.push_back(t);
  }
  row_offsets.push_back(static_cast<int>(transitions.size()));
}

MarkovGame::MarkovGame(GameData data) : data_(std::move(data)) {
  const GameShape& shape = data_.shape;
  const int H = shape.horizon();
  const int S = shape.num_states();
  const int A = shape.num_joint_actions();
  const int m = shape.num_players();
  const std::size_t rows = static_cast<std::size_t>(H) * S * A;
  if (data_.initial_state < 0 || data_.initial_state >= S) {
    throw ConfigError("initial state out of range");
  }
  if (data_.row_offsets.size() != rows + 1) {
    throw ConfigError("transition table has the wrong number of rows");
  }
  if (data_.reward_mean.size() != rows * m) {
    throw ConfigError("reward table has the wrong size");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (int k = data_.row_offsets[r]; k < data_.row_offsets[r + 1]; ++k) {
      const Transition& t = data_.transitions[k];
      if (t.next_state < 0 || t.next_state >= S) {
        throw ConfigError("transition target out of range");
      }
      if (!(t.prob >= 0.0)) throw ConfigError("negative transition probability");
      total += t.prob;
    }
    if (std::abs(total - 1.0) > kRowTolerance) {
      throw ConfigError("transition row does not sum to 1");
    }
  }
  for (double r : data_.reward_mean) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("reward mean outside [0,1]");
  }
  if (!data_.features) return;
  const LinearParameterization& f = *data_.features;
  if (f.horizon() != H || f.num_states() != S || f.num_joint_actions() != A ||
      f.num_players() != m) {
    throw DimensionError("features do not match the game shape");
  }
  std::vector<double> dense_row(S);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        std::fill(dense_row.begin(), dense_row.end(), 0.0);
        for (const Transition& t : Next(h, s, a)) dense_row[t.next_state] += t.prob;
        for (int sp = 0; sp < S; ++sp) {
          if (std::abs(f.Inner(s, a, f.Mu(h, sp)) - dense_row[sp]) >
              kLinearTolerance) {
            throw ConfigError("linear transition reconstruction mismatch");
          }
        }
        for (int i = 0; i < m; ++i) {
          if (std::abs(f.Inner(s, a, f.Theta(h, i)) - Reward(h, s, a, i)) >
              kLinearTolerance) {
            throw ConfigError("linear reward reconstruction mismatch");
          }
        }
      }
    }
  }
}

const LinearParameterization& MarkovGame::features() const {
  if (!data_.features) throw ConfigError("game has no linear features");
  return *data_.features;
}

// ---------------------------------------------------------------------------
// JointPolicy

JointPolicy::JointPolicy(const GameShape& shape) : shape_(shape) {
  const int m = shape.num_players();
  tables_.resize(static_cast<std::size_t>(shape.horizon()) * m);
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      const int n = shape.num_actions(i);
      tables_[h * m + i].assign(static_cast<std::size_t>(shape.num_states()) * n,
                                1.0 / n);
    }
  }
}

JointPolicy JointPolicy::Deterministic(const GameShape& shape,
                                       std::span<const int> choice) {
  JointPolicy p(shape);
  const int m = shape.num_players();
  const int S = shape.num_states();
  if (choice.size() != static_cast<std::size_t>(shape.horizon()) * m * S) {
    throw DimensionError("deterministic choice table has the wrong size");
  }
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < S; ++s) {
        const int a = choice[(static_cast<std::size_t>(h) * m + i) * S + s];
        if (a < 0 || a >= shape.num_actions(i)) {
          throw ConfigError("deterministic action out of range");
        }
        auto row = p.MutableRow(h, i, s);
        std::fill(row.begin(), row.end(), 0.0);
        row[a] = 1.0;
      }
    }
  }
  return p;
}

JointPolicy JointPolicy::Constant(const GameShape& shape, int joint_action) {
  const int m = shape.num_players();
  const int S = shape.num_states();
  std::vector<int> choice(static_cast<std::size_t>(shape.horizon()) * m * S);
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < S; ++s) {
        choice[(static_cast<std::size_t>(h) * m + i) * S + s] =
            shape.ActionOf(joint_action, i);
      }
    }
  }
  return Deterministic(shape, choice);
}

std::span<const double> JointPolicy::Row(int h, int i, int s) const {
  const int n = shape_.num_actions(i);
  return {tables_[h * shape_.num_players() + i].data() +
              static_cast<std::size_t>(s) * n,
          static_cast<std::size_t>(n)};
}

std::span<double> JointPolicy::MutableRow(int h, int i, int s) {
  const int n = shape_.num_actions(i);
  return {tables_[h * shape_.num_players() + i].data() +
              static_cast<std::size_t>(s) * n,
          static_cast<std::size_t>(n)};
}

double JointPolicy::JointProb(int h, int s, int joint) const {
  double p = 1.0;
  for (int i = 0; i < shape_.num_players(); ++i) {
    p *= Row(h, i, s)[shape_.ActionOf(joint, i)];
  }
  return p;
}

namespace {

// out = product over players of factor(i), in mixed-radix order.
template <typename Factor>
void ProductDistribution(const GameShape& shape, std::span<double> out,
                         Factor factor) {
  std::size_t size = 1;
  out[0] = 1.0;
  for (int i = 0; i < shape.num_players(); ++i) {
    const int n = shape.num_actions(i);
    // Expand in place from the back so earlier entries are still intact.
    for (std::size_t k = size; k-- > 0;) {
      const double base = out[k];
      for (int a = n - 1; a >= 0; --a) out[k * n + a] = base * factor(i, a);
    }
    size *= n;
  }
}

}  // namespace

void JointPolicy::JointDistribution(int h, int s, std::span<double> out) const {
  ProductDistribution(shape_, out,
                      [&](int i, int a) { return Row(h, i, s)[a]; });
}

void JointPolicy::OthersDistribution(int h, int s, int i,
                                     std::span<double> out) const {
  ProductDistribution(shape_, out, [&](int j, int a) {
    return j == i ? 1.0 : Row(h, j, s)[a];
  });
}

JointPolicy JointPolicy::WithPlayer(int i, const JointPolicy& source) const {
  if (!(source.shape_ == shape_)) {
    throw DimensionError("policies defined on different shapes");
  }
  JointPolicy out = *this;
  const int m = shape_.num_players();
  for (int h = 0; h < shape_.horizon(); ++h) {
    out.tables_[h * m + i] = source.tables_[h * m + i];
  }
  return out;
}

void JointPolicy::Validate(double tol) const {
  const int m = shape_.num_players();
  if (tables_.size() != static_cast<std::size_t>(shape_.horizon()) * m) {
    throw ConfigError("policy is not defined for every step and player");
  }
  for (int h = 0; h < shape_.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < shape_.num_states(); ++s) {
        double total = 0.0;
        for (double p : Row(h, i, s)) {
          if (!(p >= 0.0)) throw ConfigError("negative policy probability");
          total += p;
        }
        if (std::abs(total - 1.0) > tol) {
          throw ConfigError("policy row does not sum to 1");
        }
      }
    }
  }
}

bool JointPolicy::IsDeterministic() const {
  for (const auto& table : tables_) {
    for (double p : table) {
      if (p != 0.0 && p != 1.0) return false;
    }
  }
  return true;
}

int JointPolicy::Greedy(int h, int i, int s) const {
  auto row = Row(h, i, s);
  return static_cast<int>(std::max_element(row.begin(), row.end()) -
                          row.begin());
}

// ---------------------------------------------------------------------------
// Simulation and exact evaluation

int SampleIndex(std::span<const double> probs, Rng& rng) {
  const double u = Uniform01(rng);
  double cumulative = 0.0;
  int last_positive = 0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    cumulative += probs[k];
    last_positive = static_cast<int>(k);
    if (u < cumulative) return last_positive;
  }
  return last_positive;
}

namespace {

int SampleJointAction(const GameShape& shape, const JointPolicy& policy, int h,
                      int s, Rng& rng) {
  int joint = 0;
  for (int i = 0; i < shape.num_players(); ++i) {
    joint = joint * shape.num_actions(i) + SampleIndex(policy.Row(h, i, s), rng);
  }
  return joint;
}

int SampleNext(std::span<const Transition> row, Rng& rng) {
  const double u = Uniform01(rng);
  double cumulative = 0.0;
  for (const Transition& t : row) {
    cumulative += t.prob;
    if (u < cumulative) return t.next_state;
  }
  return row.back().next_state;
}

}  // namespace

void SampleEpisode(const MarkovGame& game, const JointPolicy& policy, Rng& rng,
                   std::span<int> states, std::span<int> joint_actions) {
  int s = game.initial_state();
  states[0] = s;
  for (int h = 0; h < game.horizon(); ++h) {
    const int a = SampleJointAction(game.shape(), policy, h, s, rng);
    joint_actions[h] = a;
    s = SampleNext(game.Next(h, s, a), rng);
    states[h + 1] = s;
  }
}

Trajectory Rollout(const MarkovGame& game, const JointPolicy& policy,
                   Rng& rng) {
  const int H = game.horizon();
  const int m = game.num_players();
  Trajectory traj;
  traj.states.resize(H + 1);
  traj.joint_actions.resize(H);
  std::vector<double> rewards(static_cast<std::size_t>(H) * m);
  int s = game.initial_state();
  traj.states[0] = s;
  for (int h = 0; h < H; ++h) {
    const int a = SampleJointAction(game.shape(), policy, h, s, rng);
    traj.joint_actions[h] = a;
    for (int i = 0; i < m; ++i) {
      const double mean = game.Reward(h, s, a, i);
      rewards[h * m + i] = game.reward_noise() == RewardNoise::kBernoulli
                               ? (Uniform01(rng) < mean ? 1.0 : 0.0)
                               : mean;
    }
    s = SampleNext(game.Next(h, s, a), rng);
    traj.states[h + 1] = s;
  }
  traj.realized_rewards = std::move(rewards);
  if (game.has_features()) {
    const LinearParameterization& f = game.features();
    const int d = f.dim();
    std::vector<double> feature(static_cast<std::size_t>(H) * d, 0.0);
    for (int h = 0; h < H; ++h) {
      auto idx = f.PsiIndex(traj.states[h], traj.joint_actions[h]);
      auto val = f.PsiValue(traj.states[h], traj.joint_actions[h]);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        feature[static_cast<std::size_t>(h) * d + idx[k]] = val[k];
      }
    }
    traj.feature_sum = std::move(feature);
  }
  return traj;
}

double PolicyMixture::JointProb(int h, int s, int joint) const {
  double total = 0.0;
  for (std::size_t c = 0; c < components.size(); ++c) {
    total += weights[c] * components[c].JointProb(h, s, joint);
  }
  return total;
}

Trajectory Rollout(const MarkovGame& game, const PolicyMixture& behavior,
                   Rng& rng) {
  if (behavior.components.empty() ||
      behavior.components.size() != behavior.weights.size()) {
    throw ConfigError("malformed policy mixture");
  }
  const int c = SampleIndex(behavior.weights, rng);
  return Rollout(game, behavior.components[c], rng);
}

ValueTable ExactValues(const MarkovGame& game, const JointPolicy& policy) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  ValueTable v(H, S, m);
  std::vector<double> dist(A);
  std::vector<double> q(m);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      policy.JointDistribution(h, s, dist);
      for (int a = 0; a < A; ++a) {
        if (dist[a] == 0.0) continue;
        auto r = game.Rewards(h, s, a);
        for (int i = 0; i < m; ++i) q[i] = r[i];
        for (const Transition& t : game.Next(h, s, a)) {
          for (int i = 0; i < m; ++i) q[i] += t.prob * v.At(h + 1, t.next_state, i);
        }
        for (int i = 0; i < m; ++i) v.At(h, s, i) += dist[a] * q[i];
      }
    }
  }
  return v;
}

std::vector<double> InitialValues(const MarkovGame& game,
                                  const JointPolicy& policy) {
  const ValueTable v = ExactValues(game, policy);
  std::vector<double> out(game.num_players());
  for (int i = 0; i < game.num_players(); ++i) {
    out[i] = v.At(0, game.initial_state(), i);
  }
  return out;
}

std::vector<double> StateOccupancy(const MarkovGame& game,
                                   const JointPolicy& policy) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  std::vector<double> occ(static_cast<std::size_t>(H) * S, 0.0);
  occ[game.initial_state()] = 1.0;
  std::vector<double> dist(A);
  for (int h = 0; h + 1 < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double mass = occ[static_cast<std::size_t>(h) * S + s];
      if (mass == 0.0) continue;
      policy.JointDistribution(h, s, dist);
      for (int a = 0; a < A; ++a) {
        if (dist[a] == 0.0) continue;
        for (const Transition& t : game.Next(h, s, a)) {
          occ[static_cast<std::size_t>(h + 1) * S + t.next_state] +=
              mass * dist[a] * t.prob;
        }
      }
    }
  }
  return occ;
}

LinearParameterization OneHotFeatures(const MarkovGame& game) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  const std::size_t d = static_cast<std::size_t>(S) * A;
  std::vector<double> mu(static_cast<std::size_t>(H) * S * d, 0.0);
  std::vector<double> theta(static_cast<std::size_t>(H) * m * d, 0.0);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t j = static_cast<std::size_t>(s) * A + a;
        for (const Transition& t : game.Next(h, s, a)) {
          mu[(static_cast<std::size_t>(h) * S + t.next_state) * d + j] += t.prob;
        }
        for (int i = 0; i < m; ++i) {
          theta[(static_cast<std::size_t>(h) * m + i) * d + j] =
              game.Reward(h, s, a, i);
        }
      }
    }
  }
  return LinearParameterization::OneHot(game.shape(), std::move(mu),
                                        std::move(theta));
}

LinearParameterization AnchoredOneHotFeatures(const MarkovGame& game) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  const std::size_t rows = static_cast<std::size_t>(S) * A;
  const std::size_t d = rows + 1;
  const double c = 1.0 / std::sqrt(2.0);
  const double r = c;
  std::vector<double> psi(rows * d, 0.0);
  for (std::size_t j = 0; j < rows; ++j) {
    psi[j * d] = c;
    psi[j * d + 1 + j] = r;
  }
  // <psi, mu_h(s')> = p(s') + (P_h(s'|s,a) - p(s')) with p uniform.
  const double p = 1.0 / S;
  std::vector<double> mu(static_cast<std::size_t>(H) * S * d, 0.0);
  std::vector<double> theta(static_cast<std::size_t>(H) * m * d, 0.0);
  for (int h = 0; h < H; ++h) {
    for (int sp = 0; sp < S; ++sp) {
      double* row = mu.data() + (static_cast<std::size_t>(h) * S + sp) * d;
      row[0] = p / c;
      for (std::size_t j = 0; j < rows; ++j) row[1 + j] = -p / r;
    }
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t j = static_cast<std::size_t>(s) * A + a;
        for (const Transition& t : game.Next(h, s, a)) {
          mu[(static_cast<std::size_t>(h) * S + t.next_state) * d + 1 + j] +=
              t.prob / r;
        }
        for (int i = 0; i < m; ++i) {
          theta[(static_cast<std::size_t>(h) * m + i) * d + 1 + j] =
              game.Reward(h, s, a, i) / r;
        }
      }
    }
  }
  return LinearParameterization::Dense(game.shape(), static_cast<int>(d),
                                       std::move(psi), std::move(mu),
                                       std::move(theta));
}

}  // namespace marlhf
