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

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace marlhf {

using nlohmann::json;

ReferencePolicy::ReferencePolicy(const GameShape& shape, double kappa)
    : shape_(shape), kappa_(kappa), policy_(shape) {
  if (!(kappa > 0.0)) throw ConfigError("Laplace constant must be positive");
  const int m = shape.num_players();
  counts_.resize(static_cast<std::size_t>(shape.horizon()) * m);
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      counts_[static_cast<std::size_t>(h) * m + i].assign(
          static_cast<std::size_t>(shape.num_states()) * shape.num_actions(i), 0);
    }
  }
}

void ReferencePolicy::Observe(int h, int s, int joint) {
  const int m = shape_.num_players();
  for (int i = 0; i < m; ++i) {
    ++counts_[static_cast<std::size_t>(h) * m + i]
             [static_cast<std::size_t>(s) * shape_.num_actions(i) +
              shape_.ActionOf(joint, i)];
  }
}

int ReferencePolicy::Count(int h, int i, int s, int action) const {
  return counts_[static_cast<std::size_t>(h) * shape_.num_players() + i]
                [static_cast<std::size_t>(s) * shape_.num_actions(i) + action];
}

void ReferencePolicy::Finalize() {
  for (int h = 0; h < shape_.horizon(); ++h) {
    for (int i = 0; i < shape_.num_players(); ++i) {
      const int n_a = shape_.num_actions(i);
      for (int s = 0; s < shape_.num_states(); ++s) {
        double total = kappa_ * n_a;
        for (int a = 0; a < n_a; ++a) total += Count(h, i, s, a);
        std::span<double> row = policy_.MutableRow(h, i, s);
        for (int a = 0; a < n_a; ++a) row[a] = (Count(h, i, s, a) + kappa_) / total;
      }
    }
  }
}

std::string ReferencePolicy::ToJson(const std::string& config_hash) const {
  json doc;
  doc["schema"] = "marlhf.reference/1";
  doc["config_hash"] = config_hash;
  doc["players"] = shape_.num_players();
  doc["horizon"] = shape_.horizon();
  doc["states"] = shape_.num_states();
  doc["actions"] = shape_.action_counts();
  doc["kappa"] = kappa_;
  doc["counts"] = counts_;
  return doc.dump();
}

ReferencePolicy ReferencePolicy::FromJson(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("schema", "") != "marlhf.reference/1") {
    throw ConfigError("not a marlhf.reference/1 document");
  }
  ReferencePolicy ref(GameShape(doc.at("players"), doc.at("horizon"),
                                doc.at("states"),
                                doc.at("actions").get<std::vector<int>>()),
                      doc.at("kappa").get<double>());
  auto counts = doc.at("counts").get<std::vector<std::vector<int>>>();
  if (counts.size() != ref.counts_.size()) throw ConfigError("count table mismatch");
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k].size() != ref.counts_[k].size()) {
      throw ConfigError("count table mismatch");
    }
  }
  ref.counts_ = std::move(counts);
  ref.Finalize();
  return ref;
}

ReferencePolicy FitReference(const PreferenceDataset& dataset,
                             const GameShape& shape, double kappa) {
  ReferencePolicy ref(shape, kappa);
  for (const PreferencePair& pair : dataset.pairs) {
    for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
      for (int h = 0; h < shape.horizon(); ++h) {
        ref.Observe(h, seq->states[h], seq->joint_actions[h]);
      }
    }
  }
  ref.Finalize();
  return ref;
}

double KlTerm(const ReferencePolicy& reference, int h, int s, int joint) {
  const GameShape& shape = reference.shape();
  double total = 0.0;
  for (int i = 0; i < shape.num_players(); ++i) {
    total += std::log(shape.num_actions(i) *
                      reference.Prob(h, i, s, shape.ActionOf(joint, i)));
  }
  return total;
}

double ShapedReward(double r_std, const ReferencePolicy& reference,
                    double beta, int h, int s, int joint) {
  if (beta == 0.0) return r_std;
  return r_std + beta * KlTerm(reference, h, s, joint);
}

VdnQ::VdnQ(const GameShape& shape) : shape_(shape) {
  const int m = shape.num_players();
  tables_.resize(static_cast<std::size_t>(shape.horizon()) * m);
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      tables_[static_cast<std::size_t>(h) * m + i].assign(
          static_cast<std::size_t>(shape.num_states()) * shape.num_actions(i),
          0.0);
    }
  }
}

double VdnQ::Team(int h, int s, int joint) const {
  double total = 0.0;
  for (int i = 0; i < shape_.num_players(); ++i) {
    total += At(h, i, s, shape_.ActionOf(joint, i));
  }
  return total;
}

double VdnQ::TeamMax(int h, int s) const {
  double total = 0.0;
  for (int i = 0; i < shape_.num_players(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < shape_.num_actions(i); ++a) {
      best = std::max(best, At(h, i, s, a));
    }
    total += best;
  }
  return total;
}

JointPolicy VdnQ::Greedy() const {
  const int m = shape_.num_players();
  const int S = shape_.num_states();
  std::vector<int> choice(static_cast<std::size_t>(shape_.horizon()) * m * S);
  for (int h = 0; h < shape_.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      for (int s = 0; s < S; ++s) {
        int best = 0;
        for (int a = 1; a < shape_.num_actions(i); ++a) {
          if (At(h, i, s, a) > At(h, i, s, best)) best = a;
        }
        choice[(static_cast<std::size_t>(h) * m + i) * S + s] = best;
      }
    }
  }
  return JointPolicy::Deterministic(shape_, choice);
}

VdnQ FittedQVdn(const PreferenceDataset& dataset, const GameShape& shape,
                const StepReward& reward, const VdnConfig& config) {
  if (dataset.pairs.empty()) throw ConfigError("empty dataset");
  const int H = shape.horizon();
  const int m = shape.num_players();
  std::vector<int> offset(m + 1, 0);
  for (int i = 0; i < m; ++i) offset[i + 1] = offset[i] + shape.num_actions(i);
  const int cols = offset[m];
  VdnQ q(shape);

  for (int h = H - 1; h >= 0; --h) {
    // (s, joint) -> (count, summed target); ordered for determinism.
    std::map<int, std::map<int, std::pair<int, double>>> observed;
    for (const PreferencePair& pair : dataset.pairs) {
      for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
        const int s = seq->states[h];
        const int a = seq->joint_actions[h];
        const double next = h + 1 < H ? q.TeamMax(h + 1, seq->states[h + 1]) : 0.0;
        auto& cell = observed[s][a];
        ++cell.first;
        cell.second += reward(h, s, a) + next;
      }
    }
    for (int s = 0; s < shape.num_states(); ++s) {
      auto it = observed.find(s);
      if (it == observed.end()) {
        for (int i = 0; i < m; ++i) {
          for (int a = 0; a < shape.num_actions(i); ++a) {
            q.At(h, i, s, a) = config.floor / m;
          }
        }
        continue;
      }
      const auto& rows = it->second;
      Eigen::MatrixXd x = Eigen::MatrixXd::Zero(static_cast<long>(rows.size()), cols);
      Eigen::VectorXd y(static_cast<long>(rows.size()));
      std::vector<bool> seen(cols, false);
      long r = 0;
      for (const auto& [joint, cell] : rows) {
        const double w = std::sqrt(static_cast<double>(cell.first));
        for (int i = 0; i < m; ++i) {
          const int c = offset[i] + shape.ActionOf(joint, i);
          x(r, c) = w;
          seen[c] = true;
        }
        y(r) = w * cell.second / cell.first;
        ++r;
      }
      const Eigen::VectorXd sol = x.completeOrthogonalDecomposition().solve(y);
      q.residual += (x * sol - y).squaredNorm();
      for (int i = 0; i < m; ++i) {
        double lowest = std::numeric_limits<double>::infinity();
        for (int a = 0; a < shape.num_actions(i); ++a) {
          if (seen[offset[i] + a]) lowest = std::min(lowest, sol(offset[i] + a));
        }
        for (int a = 0; a < shape.num_actions(i); ++a) {
          q.At(h, i, s, a) = seen[offset[i] + a]
                                 ? sol(offset[i] + a)
                                 : std::min(config.floor, lowest);
        }
      }
    }
  }
  return q;
}

std::string VdnQ::ToJson(const std::string& config_hash) const {
  json doc;
  doc["schema"] = "marlhf.vdn/1";
  doc["config_hash"] = config_hash;
  doc["players"] = shape_.num_players();
  doc["horizon"] = shape_.horizon();
  doc["states"] = shape_.num_states();
  doc["actions"] = shape_.action_counts();
  doc["tables"] = tables_;
  doc["residual"] = residual;
  return doc.dump();
}

VdnQ VdnQ::FromJson(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("schema", "") != "marlhf.vdn/1") {
    throw ConfigError("not a marlhf.vdn/1 document");
  }
  VdnQ q(GameShape(doc.at("players"), doc.at("horizon"), doc.at("states"),
                   doc.at("actions").get<std::vector<int>>()));
  auto tables = doc.at("tables").get<std::vector<std::vector<double>>>();
  if (tables.size() != q.tables_.size()) throw ConfigError("table count mismatch");
  for (std::size_t k = 0; k < tables.size(); ++k) {
    if (tables[k].size() != q.tables_[k].size()) {
      throw ConfigError("table size mismatch");
    }
  }
  q.tables_ = std::move(tables);
  q.residual = doc.at("residual");
  return q;
}

int ReferenceAgreement(const JointPolicy& policy, const ReferencePolicy& reference) {
  const GameShape& shape = reference.shape();
  int agree = 0;
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < shape.num_players(); ++i) {
      for (int s = 0; s < shape.num_states(); ++s) {
        int visits = 0;
        for (int a = 0; a < shape.num_actions(i); ++a) {
          visits += reference.Count(h, i, s, a);
        }
        if (visits > 0 && policy.Greedy(h, i, s) == reference.Argmax(h, i, s)) {
          ++agree;
        }
      }
    }
  }
  return agree;
}

double PolicyEvaluation::MeanReturn() const {
  double total = 0.0;
  for (double v : exact_return) total += v;
  return exact_return.empty() ? 0.0 : total / exact_return.size();
}

PolicyEvaluation EvaluatePolicy(const MarkovGame& game,
                                const JointPolicy& policy, int episodes,
                                std::uint64_t seed) {
  const int m = game.num_players();
  const int H = game.horizon();
  PolicyEvaluation eval;
  eval.exact_return = InitialValues(game, policy);
  eval.mc_return.assign(m, 0.0);
  eval.mc_stderr.assign(m, 0.0);
  if (episodes > 0) {
    Rng rng(seed);
    std::vector<double> sum(m, 0.0), sum_sq(m, 0.0);
    for (int e = 0; e < episodes; ++e) {
      const Trajectory traj = Rollout(game, policy, rng);
      for (int i = 0; i < m; ++i) {
        double ret = 0.0;
        for (int h = 0; h < H; ++h) {
          ret += (*traj.realized_rewards)[static_cast<std::size_t>(h) * m + i];
        }
        sum[i] += ret;
        sum_sq[i] += ret * ret;
      }
    }
    for (int i = 0; i < m; ++i) {
      const double mean = sum[i] / episodes;
      const double var =
          episodes > 1
              ? std::max(0.0, (sum_sq[i] - episodes * mean * mean) / (episodes - 1))
              : 0.0;
      eval.mc_return[i] = mean;
      eval.mc_stderr[i] = std::sqrt(var / episodes);
    }
  }
  eval.nash_gap = NashGap(game, policy);
  return eval;
}

}  // namespace marlhf
