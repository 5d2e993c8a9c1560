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

#include "marlhf/reward_mle.h"

#include <algorithm>
#include <cmath>
#include <map>

#include <spdlog/spdlog.h>

#include "marlhf/coverage.h"
#include "marlhf/simd/kernels.h"

namespace marlhf {

namespace {

// Identical comparisons are merged: the loss only depends on the feature
// difference and the label counts.
struct UniqueComparison {
  SparseVector diff;
  int count = 0;
  std::vector<int> positive;  // per player
  std::vector<int> negative;
};

std::vector<UniqueComparison> Aggregate(const PreferenceDataset& dataset,
                                        const LinearParameterization& features,
                                        int num_players) {
  std::map<std::vector<int>, int> index;
  std::vector<UniqueComparison> out;
  std::vector<int> key;
  for (const PreferencePair& pair : dataset.pairs) {
    if (static_cast<int>(pair.labels.size()) != num_players) {
      throw DimensionError("pair is missing labels");
    }
    key.clear();
    for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
      key.insert(key.end(), seq->states.begin(), seq->states.end());
      key.insert(key.end(), seq->joint_actions.begin(), seq->joint_actions.end());
    }
    auto [it, inserted] = index.emplace(key, static_cast<int>(out.size()));
    if (inserted) {
      UniqueComparison u;
      u.diff = TrajectoryFeatureDifference(features, pair.tau_a, pair.tau_b);
      u.positive.assign(num_players, 0);
      u.negative.assign(num_players, 0);
      out.push_back(std::move(u));
    }
    UniqueComparison& u = out[it->second];
    ++u.count;
    for (int i = 0; i < num_players; ++i) {
      if (pair.labels[i] == 1) {
        ++u.positive[i];
      } else if (pair.labels[i] == -1) {
        ++u.negative[i];
      } else {
        throw ConfigError("labels must be +1 or -1");
      }
    }
  }
  return out;
}

double SparseDot(const SparseVector& x, std::span<const double> theta) {
  double z = 0.0;
  for (std::size_t k = 0; k < x.nnz(); ++k) z += x.value[k] * theta[x.index[k]];
  return z;
}

class Objective {
 public:
  Objective(const std::vector<UniqueComparison>& data, int player, int total)
      : data_(data), player_(player), scale_(1.0 / total) {}

  double Loss(std::span<const double> theta) const {
    double loss = 0.0;
    for (const UniqueComparison& u : data_) {
      const double z = SparseDot(u.diff, theta);
      loss += u.positive[player_] * Softplus(-z) +
              u.negative[player_] * Softplus(z);
    }
    return loss * scale_;
  }

  double LossAndGradient(std::span<const double> theta,
                         std::span<double> grad) const {
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (const UniqueComparison& u : data_) {
      const double z = SparseDot(u.diff, theta);
      loss += u.positive[player_] * Softplus(-z) +
              u.negative[player_] * Softplus(z);
      const double coeff = (-u.positive[player_] * Sigmoid(-z) +
                            u.negative[player_] * Sigmoid(z)) *
                           scale_;
      for (std::size_t k = 0; k < u.diff.nnz(); ++k) {
        grad[u.diff.index[k]] += coeff * u.diff.value[k];
      }
    }
    return loss * scale_;
  }

 private:
  const std::vector<UniqueComparison>& data_;
  int player_;
  double scale_;
};

void Project(std::span<double> theta, int dim, int horizon) {
  const double radius = std::sqrt(static_cast<double>(dim));
  for (int h = 0; h < horizon; ++h) {
    std::span<double> block = theta.subspan(static_cast<std::size_t>(h) * dim, dim);
    const double norm = std::sqrt(simd::Dot(block, block));
    if (norm > radius) {
      for (double& v : block) v *= radius / norm;
    }
  }
}

MleDiagnostics Minimize(const Objective& objective, std::span<double> theta,
                        int dim, int horizon, const MleConfig& config) {
  const std::size_t n = theta.size();
  std::vector<double> grad(n), next(n), next_grad(n), step(n), probe(n);
  MleDiagnostics diag;
  double loss = objective.LossAndGradient(theta, grad);
  double t = 1.0;
  for (diag.iterations = 0; diag.iterations < config.max_iterations;
       ++diag.iterations) {
    // Projected-gradient stationarity measure.
    for (std::size_t k = 0; k < n; ++k) probe[k] = theta[k] - grad[k];
    Project(probe, dim, horizon);
    double pg = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      pg += (theta[k] - probe[k]) * (theta[k] - probe[k]);
    }
    diag.gradient_norm = std::sqrt(pg);
    if (diag.gradient_norm <= config.tolerance) {
      diag.converged = true;
      break;
    }
    bool accepted = false;
    double next_loss = loss;
    for (int halving = 0; halving < 80; ++halving) {
      for (std::size_t k = 0; k < n; ++k) next[k] = theta[k] - t * grad[k];
      Project(next, dim, horizon);
      double linear = 0.0, quad = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        step[k] = next[k] - theta[k];
        linear += grad[k] * step[k];
        quad += step[k] * step[k];
      }
      next_loss = objective.Loss(next);
      if (next_loss <= loss + linear + quad / (2.0 * t)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    next_loss = objective.LossAndGradient(next, next_grad);
    double sy = 0.0, ss = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      sy += step[k] * (next_grad[k] - grad[k]);
      ss += step[k] * step[k];
    }
    t = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : std::min(t * 2.0, 1e10);
    std::copy(next.begin(), next.end(), theta.begin());
    grad.swap(next_grad);
    loss = next_loss;
  }
  diag.loss = loss;
  return diag;
}

}  // namespace

double RewardEstimate::Mean(const LinearParameterization& features, int player,
                            int h, int s, int a) const {
  return features.Inner(
      s, a,
      std::span<const double>(theta_hat[player]).subspan(
          static_cast<std::size_t>(h) * dim, dim));
}

double ConfidenceRadius(double c, double delta, double lambda, int n, int dim,
                        int horizon) {
  const double nn = std::max(1, n);
  return c * std::sqrt((dim * horizon + std::log(1.0 / delta)) /
                           (lambda * lambda * nn) +
                       dim);
}

RewardEstimate FitLinearMle(const PreferenceDataset& dataset,
                            const LinearParameterization& features,
                            const MleConfig& config) {
  if (dataset.pairs.empty()) throw ConfigError("empty preference dataset");
  if (!(config.delta > 0.0 && config.delta < 1.0)) {
    throw ConfigError("delta must lie in (0, 1)");
  }
  const int m = static_cast<int>(dataset.pairs.front().labels.size());
  const int d = features.dim();
  const int H = features.horizon();
  const int n = static_cast<int>(dataset.pairs.size());
  const std::vector<UniqueComparison> data = Aggregate(dataset, features, m);

  RewardEstimate est;
  est.dim = d;
  est.horizon = H;
  est.num_pairs = n;
  est.lambda = config.lambda;
  est.delta = config.delta;
  est.c = config.c;
  est.confidence_radius = ConfidenceRadius(config.c, config.delta,
                                           config.lambda, n, d, H);
  auto gram = std::make_shared<RidgeGram>(H * d, config.lambda);
  for (const UniqueComparison& u : data) {
    gram->AddOuter(u.diff, static_cast<double>(u.count) / n);
  }
  gram->Finalize();
  est.confidence_gram = gram;
  for (int i = 0; i < m; ++i) {
    std::vector<double> theta(static_cast<std::size_t>(H) * d, 0.0);
    const Objective objective(data, i, n);
    MleDiagnostics diag = Minimize(objective, theta, d, H, config);
    if (!diag.converged) {
      spdlog::warn("MLE for player {} stopped after {} iterations with "
                   "projected gradient norm {:.3e}",
                   i, diag.iterations, diag.gradient_norm);
    }
    est.theta_hat.push_back(std::move(theta));
    est.diagnostics.push_back(diag);
  }
  return est;
}

RewardEstimate EmptyRewardEstimate(const LinearParameterization& features,
                                   int num_players, const MleConfig& config) {
  RewardEstimate est;
  est.dim = features.dim();
  est.horizon = features.horizon();
  est.lambda = config.lambda;
  est.delta = config.delta;
  est.c = config.c;
  est.confidence_radius = ConfidenceRadius(config.c, config.delta,
                                           config.lambda, 1, est.dim,
                                           est.horizon);
  auto gram = std::make_shared<RidgeGram>(est.dim * est.horizon, config.lambda);
  gram->Finalize();
  est.confidence_gram = gram;
  est.theta_hat.assign(num_players, std::vector<double>(
                                        static_cast<std::size_t>(est.dim) *
                                            est.horizon,
                                        0.0));
  est.diagnostics.assign(num_players, MleDiagnostics{0, 0.0, 0.0, true});
  return est;
}

RewardInterval RewardBounds(const RewardEstimate& estimate,
                            const LinearParameterization& features, int player,
                            int h, int s, int a) {
  const double mean = estimate.Mean(features, player, h, s, a);
  const double width = estimate.confidence_radius *
                       estimate.confidence_gram->InverseNorm(features.Lift(h, s, a));
  return {mean - width, mean + width};
}

double PreferenceNll(const PreferenceDataset& dataset,
                     const LinearParameterization& features, int player,
                     std::span<const double> theta) {
  if (dataset.pairs.empty()) return 0.0;
  double loss = 0.0;
  for (const PreferencePair& pair : dataset.pairs) {
    const double z = SparseDot(
        TrajectoryFeatureDifference(features, pair.tau_a, pair.tau_b), theta);
    loss += Softplus(-pair.labels[player] * z);
  }
  return loss / dataset.pairs.size();
}

double ConfidenceDistance(const RewardEstimate& estimate, int player,
                          std::span<const double> theta) {
  std::vector<double> err(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) {
    err[k] = estimate.theta_hat[player][k] - theta[k];
  }
  return std::sqrt(std::max(0.0, estimate.confidence_gram->QuadDense(err)));
}

std::vector<double> StackedTheta(const LinearParameterization& features,
                                 int player) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(features.horizon()) * features.dim());
  for (int h = 0; h < features.horizon(); ++h) {
    auto t = features.Theta(h, player);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

}  // namespace marlhf
