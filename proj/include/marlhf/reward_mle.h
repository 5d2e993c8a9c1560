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

#ifndef MARLHF_REWARD_MLE_H_
#define MARLHF_REWARD_MLE_H_

#include <memory>
#include <span>
#include <vector>

#include "marlhf/dataset.h"
#include "marlhf/game.h"
#include "marlhf/linalg.h"

namespace marlhf {

struct MleConfig {
  double lambda = 1.0;
  double delta = 0.05;
  double c = 0.1;  // constant in the confidence radius
  int max_iterations = 10000;
  double tolerance = 1e-6;  // on the projected-gradient norm
};

struct MleDiagnostics {
  int iterations = 0;
  double gradient_norm = 0.0;
  double loss = 0.0;
  bool converged = false;
};

// Linear preference-model estimate, one parameter vector per player.
//
// The confidence ellipsoid is measured in the per-pair normalized Gram
// matrix  lambda I + (1/n) sum (psi(tau) - psi(tau'))(...)^T, the convention
// under which the radius C sqrt((dH + log(1/delta)) / (lambda^2 n) + d) is
// calibrated. The unnormalized preference covariance used by the coverage
// functional is a different object (see coverage.h).
struct RewardEstimate {
  int dim = 0;
  int horizon = 0;
  int num_pairs = 0;
  double lambda = 1.0;
  double delta = 0.05;
  double c = 0.1;
  double confidence_radius = 0.0;
  std::vector<std::vector<double>> theta_hat;  // [player][h * d + k]
  std::shared_ptr<const RidgeGram> confidence_gram;
  std::vector<MleDiagnostics> diagnostics;

  int num_players() const { return static_cast<int>(theta_hat.size()); }
  // <lift_h(psi(s,a)), theta_hat_i>
  double Mean(const LinearParameterization& features, int player, int h, int s,
              int a) const;
};

double ConfidenceRadius(double c, double delta, double lambda, int n, int dim,
                        int horizon);

// Projected gradient descent (Barzilai-Borwein initial step, backtracking to
// a sufficient-decrease condition, so accepted iterates never increase the
// loss) onto {theta : ||theta_h|| <= sqrt(d) for every h}.
RewardEstimate FitLinearMle(const PreferenceDataset& dataset,
                            const LinearParameterization& features,
                            const MleConfig& config);

// Zero estimate with a lambda-only Gram matrix, for runs without data. The
// radius uses n = 1.
RewardEstimate EmptyRewardEstimate(const LinearParameterization& features,
                                   int num_players, const MleConfig& config);

struct RewardInterval {
  double lower = 0.0;
  double upper = 0.0;
};

// Closed-form extremes of <lift_h(psi(s,a)), theta> over the ellipsoid.
RewardInterval RewardBounds(const RewardEstimate& estimate,
                            const LinearParameterization& features, int player,
                            int h, int s, int a);

// Mean negative log-likelihood of player's labels at theta (length H d).
double PreferenceNll(const PreferenceDataset& dataset,
                     const LinearParameterization& features, int player,
                     std::span<const double> theta);

// ||theta_hat_i - theta||_G with G the confidence Gram matrix.
double ConfidenceDistance(const RewardEstimate& estimate, int player,
                          std::span<const double> theta);

// Ground-truth theta of a game stacked as [h * d + k] for one player.
std::vector<double> StackedTheta(const LinearParameterization& features,
                                 int player);

}  // namespace marlhf

#endif  // MARLHF_REWARD_MLE_H_
