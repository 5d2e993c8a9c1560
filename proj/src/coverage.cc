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

#include "marlhf/coverage.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace marlhf {

namespace {

void CheckSequence(const LinearParameterization& f, const StepSequence& seq) {
  if (static_cast<int>(seq.joint_actions.size()) != f.horizon() ||
      static_cast<int>(seq.states.size()) != f.horizon() + 1) {
    throw DimensionError("trajectory length does not match the horizon");
  }
}

void CheckFeatures(const LinearParameterization& f, const CovarianceSet& cov) {
  if (f.dim() != cov.dim || f.horizon() != cov.horizon) {
    throw DimensionError(fmt::format(
        "covariance built for (d={}, H={}) but game features are (d={}, H={})",
        cov.dim, cov.horizon, f.dim(), f.horizon()));
  }
}

}  // namespace

SparseVector TrajectoryFeature(const LinearParameterization& features,
                               const StepSequence& seq) {
  CheckSequence(features, seq);
  SparseVector out;
  for (int h = 0; h < features.horizon(); ++h) {
    auto idx = features.PsiIndex(seq.states[h], seq.joint_actions[h]);
    auto val = features.PsiValue(seq.states[h], seq.joint_actions[h]);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.Add(h * features.dim() + idx[k], val[k]);
    }
  }
  return out;
}

SparseVector TrajectoryFeatureDifference(const LinearParameterization& features,
                                         const StepSequence& a,
                                         const StepSequence& b) {
  CheckSequence(features, a);
  CheckSequence(features, b);
  SparseVector out;
  const int d = features.dim();
  for (int h = 0; h < features.horizon(); ++h) {
    const int sa = a.states[h], ua = a.joint_actions[h];
    const int sb = b.states[h], ub = b.joint_actions[h];
    if (sa == sb && ua == ub) continue;
    const std::size_t block_start = out.nnz();
    auto ia = features.PsiIndex(sa, ua);
    auto va = features.PsiValue(sa, ua);
    for (std::size_t k = 0; k < ia.size(); ++k) out.Add(h * d + ia[k], va[k]);
    auto ib = features.PsiIndex(sb, ub);
    auto vb = features.PsiValue(sb, ub);
    for (std::size_t k = 0; k < ib.size(); ++k) {
      const int coord = h * d + ib[k];
      bool merged = false;
      for (std::size_t q = block_start; q < out.nnz(); ++q) {
        if (out.index[q] == coord) {
          out.value[q] -= vb[k];
          merged = true;
          break;
        }
      }
      if (!merged) out.Add(coord, -vb[k]);
    }
  }
  return out;
}

CovarianceSet BuildCovariances(const PreferenceDataset& dataset,
                               const LinearParameterization& features,
                               double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  const int H = features.horizon();
  const int d = features.dim();
  CovarianceSet cov;
  cov.lambda = lambda;
  cov.dim = d;
  cov.horizon = H;
  cov.num_pairs = static_cast<int>(dataset.pairs.size());
  cov.sigma_r = RidgeGram(H * d, lambda);
  cov.sigma_p.reserve(H);
  for (int h = 0; h < H; ++h) cov.sigma_p.emplace_back(d, lambda);
  for (const PreferencePair& pair : dataset.pairs) {
    cov.sigma_r.AddOuter(
        TrajectoryFeatureDifference(features, pair.tau_a, pair.tau_b));
    for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
      for (int h = 0; h < H; ++h) {
        cov.sigma_p[h].AddOuter(
            features.Psi(seq->states[h], seq->joint_actions[h]));
      }
    }
  }
  cov.sigma_r.Finalize();
  for (RidgeGram& g : cov.sigma_p) g.Finalize();
  return cov;
}

BonusTable ComputeBonuses(const MarkovGame& game,
                          const CovarianceSet& covariances) {
  return ComputeBonuses(game.features(), covariances);
}

BonusTable ComputeBonuses(const LinearParameterization& f,
                          const CovarianceSet& covariances) {
  CheckFeatures(f, covariances);
  BonusTable table;
  table.horizon = f.horizon();
  table.num_states = f.num_states();
  table.num_joint = f.num_joint_actions();
  const std::size_t size =
      static_cast<std::size_t>(table.horizon) * table.num_states * table.num_joint;
  table.reward.resize(size);
  table.transition.resize(size);
  std::size_t k = 0;
  for (int h = 0; h < table.horizon; ++h) {
    for (int s = 0; s < table.num_states; ++s) {
      for (int a = 0; a < table.num_joint; ++a, ++k) {
        table.reward[k] = covariances.sigma_r.InverseNorm(f.Lift(h, s, a));
        table.transition[k] = covariances.sigma_p[h].InverseNorm(f.Psi(s, a));
      }
    }
  }
  return table;
}

Uncertainty PolicyUncertainty(const MarkovGame& game, const JointPolicy& policy,
                              const BonusTable& bonuses) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const std::vector<double> occ = StateOccupancy(game, policy);
  std::vector<double> dist(A);
  Uncertainty u;
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      const double mass = occ[static_cast<std::size_t>(h) * S + s];
      if (mass == 0.0) continue;
      policy.JointDistribution(h, s, dist);
      for (int a = 0; a < A; ++a) {
        if (dist[a] == 0.0) continue;
        const std::size_t k = (static_cast<std::size_t>(h) * S + s) * A + a;
        u.reward_term += mass * dist[a] * bonuses.reward[k];
        u.transition_term += mass * dist[a] * bonuses.transition[k];
      }
    }
  }
  u.total = u.reward_term + u.transition_term;
  return u;
}

Uncertainty PolicyUncertainty(const MarkovGame& game, const JointPolicy& policy,
                              const CovarianceSet& covariances) {
  return PolicyUncertainty(game, policy, ComputeBonuses(game, covariances));
}

std::pair<double, double> PolicyUncertaintyMonteCarlo(
    const MarkovGame& game, const JointPolicy& policy,
    const BonusTable& bonuses, int episodes, Rng& rng) {
  const int H = game.horizon();
  std::vector<int> states(H + 1), actions(H);
  double sum = 0.0, sum_sq = 0.0;
  for (int e = 0; e < episodes; ++e) {
    SampleEpisode(game, policy, rng, states, actions);
    double total = 0.0;
    for (int h = 0; h < H; ++h) total += bonuses.Total(h, states[h], actions[h]);
    sum += total;
    sum_sq += total * total;
  }
  const double mean = sum / episodes;
  const double var = std::max(0.0, sum_sq / episodes - mean * mean);
  return {mean, std::sqrt(var / episodes)};
}

std::pair<Uncertainty, JointPolicy> MaxPolicyUncertainty(
    const MarkovGame& game, const BonusTable& bonuses,
    const std::optional<FixedOthers>& fixed_others) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  const GameShape& shape = game.shape();
  std::vector<double> v_next(S, 0.0), v(S, 0.0);
  std::vector<int> choice(static_cast<std::size_t>(H) * m * S, 0);
  std::vector<double> others(A);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      auto value_of = [&](int a) {
        double q = bonuses.Total(h, s, a);
        for (const Transition& t : game.Next(h, s, a)) {
          q += t.prob * v_next[t.next_state];
        }
        return q;
      };
      if (!fixed_others) {
        int best = 0;
        double best_q = value_of(0);
        for (int a = 1; a < A; ++a) {
          const double q = value_of(a);
          if (q > best_q) {
            best = a;
            best_q = q;
          }
        }
        v[s] = best_q;
        for (int i = 0; i < m; ++i) {
          choice[(static_cast<std::size_t>(h) * m + i) * S + s] =
              shape.ActionOf(best, i);
        }
      } else {
        const int i = fixed_others->player;
        fixed_others->others.OthersDistribution(h, s, i, others);
        std::vector<double> q(game.num_actions(i), 0.0);
        for (int a = 0; a < A; ++a) {
          if (others[a] != 0.0) q[shape.ActionOf(a, i)] += others[a] * value_of(a);
        }
        const int best =
            static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
        v[s] = q[best];
        choice[(static_cast<std::size_t>(h) * m + i) * S + s] = best;
      }
    }
    std::swap(v, v_next);
  }
  JointPolicy argmax = JointPolicy::Deterministic(shape, choice);
  if (fixed_others) {
    argmax = fixed_others->others.WithPlayer(fixed_others->player, argmax);
  }
  Uncertainty u = PolicyUncertainty(game, argmax, bonuses);
  // Report the DP optimum itself; the split comes from evaluating the argmax.
  u.total = v_next[game.initial_state()];
  return {u, std::move(argmax)};
}

std::pair<Uncertainty, JointPolicy> MaxPolicyUncertainty(
    const MarkovGame& game, const CovarianceSet& covariances,
    const std::optional<FixedOthers>& fixed_others) {
  return MaxPolicyUncertainty(game, ComputeBonuses(game, covariances),
                              fixed_others);
}

std::string CoverageReport::CsvHeader() {
  return "single,single_reward,single_transition,unilateral,"
         "unilateral_reward,unilateral_transition,unilateral_player,uniform,"
         "uniform_reward,uniform_transition";
}

std::string CoverageReport::CsvRow() const {
  return fmt::format("{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},"
                     "{:.17g},{:.17g},{:.17g}",
                     single.total, single.reward_term, single.transition_term,
                     unilateral.total, unilateral.reward_term,
                     unilateral.transition_term, unilateral_player,
                     uniform.total, uniform.reward_term,
                     uniform.transition_term);
}

CoverageReport BuildCoverageReport(const MarkovGame& game,
                                   const JointPolicy& pi_star,
                                   const CovarianceSet& covariances) {
  return BuildCoverageReport(game, pi_star, ComputeBonuses(game, covariances));
}

CoverageReport BuildCoverageReport(const MarkovGame& game,
                                   const JointPolicy& pi_star,
                                   const BonusTable& bonuses) {
  CoverageReport report;
  report.single = PolicyUncertainty(game, pi_star, bonuses);
  report.unilateral.total = -1.0;
  for (int i = 0; i < game.num_players(); ++i) {
    auto [u, policy] =
        MaxPolicyUncertainty(game, bonuses, FixedOthers{i, pi_star});
    if (u.total > report.unilateral.total) {
      report.unilateral = u;
      report.unilateral_player = i;
    }
  }
  report.uniform = MaxPolicyUncertainty(game, bonuses).first;
  return report;
}

}  // namespace marlhf
