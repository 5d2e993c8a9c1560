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
#include <limits>
#include <map>

#include <fmt/format.h>

namespace marlhf {

double TransitionBonusConstant(double c, int dim, std::int64_t num_samples,
                               int horizon, double delta) {
  const double n = static_cast<double>(std::max<std::int64_t>(1, num_samples));
  return c * dim * horizon * std::sqrt(std::log(2.0 * dim * n * horizon / delta));
}

TheoryContext::TheoryContext(const PreferenceDataset& dataset,
                             const LinearParameterization& features,
                             const CovarianceSet& covariances,
                             const RewardEstimate& reward_estimate,
                             const TheoryConfig& config)
    : features_(&features),
      covariances_(&covariances),
      reward_(&reward_estimate),
      horizon_(features.horizon()),
      num_states_(features.num_states()),
      num_joint_(features.num_joint_actions()),
      num_players_(reward_estimate.num_players()),
      dim_(features.dim()) {
  if (covariances.dim != dim_ || covariances.horizon != horizon_ ||
      reward_estimate.dim != dim_ || reward_estimate.horizon != horizon_) {
    throw DimensionError(fmt::format(
        "features are (d={}, H={}); covariances (d={}, H={}); estimate "
        "(d={}, H={})",
        dim_, horizon_, covariances.dim, covariances.horizon,
        reward_estimate.dim, reward_estimate.horizon));
  }
  if (!(config.delta > 0.0 && config.delta < 1.0) || !(config.c_p > 0.0)) {
    throw ConfigError("theory constants must be positive with delta in (0,1)");
  }
  num_samples_ = 2 * static_cast<std::int64_t>(dataset.pairs.size());
  c_p_ = TransitionBonusConstant(config.c_p, dim_, num_samples_, horizon_,
                                 config.delta);

  samples_.resize(horizon_);
  for (int h = 0; h < horizon_; ++h) {
    std::map<std::pair<int, int>, std::map<int, int>> grouped;
    for (const PreferencePair& pair : dataset.pairs) {
      for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
        ++grouped[{seq->states[h], seq->joint_actions[h]}][seq->states[h + 1]];
      }
    }
    for (const auto& [key, next] : grouped) {
      SampleGroup g;
      g.state = key.first;
      g.joint_action = key.second;
      for (const auto& [sp, count] : next) {
        g.next_counts.emplace_back(sp, count);
        g.count += count;
      }
      for (int i = 0; i < num_players_; ++i) {
        const RewardInterval r =
            RewardBounds(reward_estimate, features, i, h, g.state,
                         g.joint_action);
        g.reward_lower.push_back(r.lower);
        g.reward_upper.push_back(r.upper);
      }
      samples_[h].push_back(std::move(g));
    }
  }

  transition_bonus_.resize(static_cast<std::size_t>(horizon_) * num_states_ *
                           num_joint_);
  for (int h = 0; h < horizon_; ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_joint_; ++a) {
        transition_bonus_[Index(h, s, a)] =
            covariances.sigma_p[h].InverseNorm(features.Psi(s, a));
      }
    }
  }
}

std::vector<double> TheoryContext::Regress(int h, int player, bool optimistic,
                                           std::span<const double> v_next) const {
  std::vector<double> b(dim_, 0.0);
  for (const SampleGroup& g : samples_[h]) {
    double target = g.count * (optimistic ? g.reward_upper[player]
                                          : g.reward_lower[player]);
    for (const auto& [sp, count] : g.next_counts) target += count * v_next[sp];
    auto idx = features_->PsiIndex(g.state, g.joint_action);
    auto val = features_->PsiValue(g.state, g.joint_action);
    for (std::size_t k = 0; k < idx.size(); ++k) b[idx[k]] += val[k] * target;
  }
  return covariances_->sigma_p[h].Solve(b);
}

ValueEstimate TheoryContext::PessimisticValue(const JointPolicy& policy,
                                              int player) const {
  ValueEstimate est;
  est.kind = ValueKind::kPessimistic;
  est.player = player;
  est.horizon = horizon_;
  est.num_states = num_states_;
  est.num_joint = num_joint_;
  est.dim = dim_;
  est.v.assign(static_cast<std::size_t>(horizon_ + 1) * num_states_, 0.0);
  est.q.assign(static_cast<std::size_t>(horizon_) * num_states_ * num_joint_,
               0.0);
  est.w.assign(static_cast<std::size_t>(horizon_) * dim_, 0.0);
  std::vector<double> dist(num_joint_);
  for (int h = horizon_ - 1; h >= 0; --h) {
    std::span<const double> v_next(
        est.v.data() + static_cast<std::size_t>(h + 1) * num_states_,
        num_states_);
    const std::vector<double> w = Regress(h, player, false, v_next);
    std::copy(w.begin(), w.end(), est.w.begin() + static_cast<long>(h) * dim_);
    for (int s = 0; s < num_states_; ++s) {
      policy.JointDistribution(h, s, dist);
      double v = 0.0;
      for (int a = 0; a < num_joint_; ++a) {
        // Clipping above at H never cuts below the true value, which is
        // bounded by H as well.
        const double q = std::clamp(
            features_->Inner(s, a, w) - c_p_ * transition_bonus_[Index(h, s, a)],
            0.0, static_cast<double>(horizon_));
        est.q[Index(h, s, a)] = q;
        v += dist[a] * q;
      }
      est.v[static_cast<std::size_t>(h) * num_states_ + s] = v;
    }
  }
  return est;
}

ValueEstimate TheoryContext::OptimisticBestResponse(const JointPolicy& others,
                                                    int player) const {
  const GameShape& shape = others.shape();
  const int n_own = shape.num_actions(player);
  ValueEstimate est;
  est.kind = ValueKind::kOptimisticBestResponse;
  est.player = player;
  est.horizon = horizon_;
  est.num_states = num_states_;
  est.num_joint = num_joint_;
  est.dim = dim_;
  est.v.assign(static_cast<std::size_t>(horizon_ + 1) * num_states_, 0.0);
  est.q.assign(static_cast<std::size_t>(horizon_) * num_states_ * num_joint_,
               0.0);
  est.w.assign(static_cast<std::size_t>(horizon_) * dim_, 0.0);
  est.best_action.assign(static_cast<std::size_t>(horizon_) * num_states_, 0);
  std::vector<double> dist(num_joint_), own(n_own);
  for (int h = horizon_ - 1; h >= 0; --h) {
    std::span<const double> v_next(
        est.v.data() + static_cast<std::size_t>(h + 1) * num_states_,
        num_states_);
    const std::vector<double> w = Regress(h, player, true, v_next);
    std::copy(w.begin(), w.end(), est.w.begin() + static_cast<long>(h) * dim_);
    for (int s = 0; s < num_states_; ++s) {
      others.OthersDistribution(h, s, player, dist);
      std::fill(own.begin(), own.end(), 0.0);
      for (int a = 0; a < num_joint_; ++a) {
        // Also clipped below at 0: the true value is nonnegative.
        const double q = std::clamp(
            features_->Inner(s, a, w) + c_p_ * transition_bonus_[Index(h, s, a)],
            0.0, static_cast<double>(horizon_));
        est.q[Index(h, s, a)] = q;
        own[shape.ActionOf(a, player)] += dist[a] * q;
      }
      const int best = static_cast<int>(
          std::max_element(own.begin(), own.end()) - own.begin());
      est.best_action[static_cast<std::size_t>(h) * num_states_ + s] = best;
      est.v[static_cast<std::size_t>(h) * num_states_ + s] = own[best];
    }
  }
  return est;
}

double TheoryContext::Surrogate(const JointPolicy& policy,
                                int initial_state) const {
  double total = 0.0;
  for (int i = 0; i < num_players_; ++i) {
    total += OptimisticBestResponse(policy, i).Initial(initial_state) -
             PessimisticValue(policy, i).Initial(initial_state);
  }
  return total;
}

BonusTable TheoryContext::ScaledBonuses() const {
  BonusTable table;
  table.horizon = horizon_;
  table.num_states = num_states_;
  table.num_joint = num_joint_;
  table.reward.resize(transition_bonus_.size());
  table.transition.resize(transition_bonus_.size());
  const double c_r = reward_->confidence_radius;
  for (int h = 0; h < horizon_; ++h) {
    for (int s = 0; s < num_states_; ++s) {
      for (int a = 0; a < num_joint_; ++a) {
        const std::size_t k = Index(h, s, a);
        table.reward[k] =
            c_r * reward_->confidence_gram->InverseNorm(features_->Lift(h, s, a));
        table.transition[k] = c_p_ * transition_bonus_[k];
      }
    }
  }
  return table;
}

std::int64_t DeterministicPolicyCount(const GameShape& shape,
                                      std::int64_t cap) {
  std::int64_t count = 1;
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < shape.num_players(); ++i) {
      for (int s = 0; s < shape.num_states(); ++s) {
        count *= shape.num_actions(i);
        if (count > cap) return cap + 1;
      }
    }
  }
  return count;
}

namespace {

void TraceHeader(std::ostream& out, int m) {
  out << "candidate";
  for (int i = 0; i < m; ++i) out << ",v_pess_" << i;
  for (int i = 0; i < m; ++i) out << ",v_opt_br_" << i;
  out << ",surrogate\n";
}

void TraceRow(std::ostream& out, std::int64_t id,
              const std::vector<double>& low, const std::vector<double>& high,
              double surrogate) {
  out << id;
  for (double v : low) out << fmt::format(",{:.17g}", v);
  for (double v : high) out << fmt::format(",{:.17g}", v);
  out << fmt::format(",{:.17g}\n", surrogate);
}

}  // namespace

SurrogateResult SurrogateMinimize(const TheoryContext& context,
                                  const GameShape& shape, int initial_state,
                                  const TheoryConfig& config,
                                  std::ostream* trace) {
  const std::int64_t count =
      DeterministicPolicyCount(shape, config.max_candidates);
  if (count > config.max_candidates) {
    throw SizingError(fmt::format(
        "policy class has more than {} deterministic candidates",
        config.max_candidates));
  }
  const int H = shape.horizon();
  const int m = shape.num_players();
  const int S = shape.num_states();
  const std::size_t len = static_cast<std::size_t>(H) * m * S;
  std::vector<int> choice(len, 0), radix(len);
  for (int h = 0; h < H; ++h) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < S; ++s) {
        radix[(static_cast<std::size_t>(h) * m + i) * S + s] = shape.num_actions(i);
      }
    }
  }
  // The optimistic best response of player i only reads the others'
  // components, so it is shared by every candidate that agrees off i.
  std::vector<std::map<std::vector<int>, double>> cache(m);
  std::vector<int> key;
  std::vector<double> low(m), high(m);
  if (trace) TraceHeader(*trace, m);

  SurrogateResult best;
  best.surrogate = std::numeric_limits<double>::infinity();
  best.num_candidates = count;
  for (std::int64_t id = 0; id < count; ++id) {
    const JointPolicy policy = JointPolicy::Deterministic(shape, choice);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      key.clear();
      for (int h = 0; h < H; ++h) {
        for (int j = 0; j < m; ++j) {
          if (j == i) continue;
          const auto begin =
              choice.begin() + static_cast<long>((h * m + j) * S);
          key.insert(key.end(), begin, begin + S);
        }
      }
      auto it = cache[i].find(key);
      if (it == cache[i].end()) {
        it = cache[i]
                 .emplace(key, context.OptimisticBestResponse(policy, i)
                                   .Initial(initial_state))
                 .first;
      }
      high[i] = it->second;
      low[i] = context.PessimisticValue(policy, i).Initial(initial_state);
      total += high[i] - low[i];
    }
    if (trace) TraceRow(*trace, id, low, high, total);
    if (total < best.surrogate) {
      best.surrogate = total;
      best.candidate_index = id;
      best.policy = policy;
    }
    // Advance the mixed-radix counter, last entry fastest.
    for (std::size_t k = len; k-- > 0;) {
      if (++choice[k] < radix[k]) break;
      choice[k] = 0;
    }
  }
  return best;
}

SurrogateResult SurrogateMinimize(const TheoryContext& context,
                                  std::span<const JointPolicy> candidates,
                                  int initial_state, std::ostream* trace) {
  if (candidates.empty()) throw ConfigError("no candidate policies");
  const int m = context.num_players();
  std::vector<double> low(m), high(m);
  if (trace) TraceHeader(*trace, m);
  SurrogateResult best;
  best.surrogate = std::numeric_limits<double>::infinity();
  best.num_candidates = static_cast<std::int64_t>(candidates.size());
  for (std::size_t id = 0; id < candidates.size(); ++id) {
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
      high[i] = context.OptimisticBestResponse(candidates[id], i)
                    .Initial(initial_state);
      low[i] = context.PessimisticValue(candidates[id], i).Initial(initial_state);
      total += high[i] - low[i];
    }
    if (trace) TraceRow(*trace, static_cast<std::int64_t>(id), low, high, total);
    if (total < best.surrogate) {
      best.surrogate = total;
      best.candidate_index = static_cast<std::int64_t>(id);
      best.policy = candidates[id];
    }
  }
  return best;
}

double UnilateralBound(const TheoryContext& context, const MarkovGame& game,
                       const JointPolicy& pi_star) {
  const BonusTable bonuses = context.ScaledBonuses();
  double total = 0.0;
  for (int i = 0; i < game.num_players(); ++i) {
    total += 4.0 *
             MaxPolicyUncertainty(game, bonuses, FixedOthers{i, pi_star})
                 .first.total;
  }
  return total;
}

}  // namespace marlhf
