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

#ifndef MARLHF_COVERAGE_H_
#define MARLHF_COVERAGE_H_

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "marlhf/dataset.h"
#include "marlhf/game.h"
#include "marlhf/linalg.h"

namespace marlhf {

// psi(tau) in R^{H d}: block h holds psi(s_h, a_h).
SparseVector TrajectoryFeature(const LinearParameterization& features,
                               const StepSequence& seq);
// psi(tau_a) - psi(tau_b), merged per block.
SparseVector TrajectoryFeatureDifference(const LinearParameterization& features,
                                         const StepSequence& a,
                                         const StepSequence& b);

// sigma_r = lambda I + sum over pairs of diff diff^T         (H d x H d)
// sigma_p[h] = lambda I + sum over both trajectories of psi psi^T   (d x d)
// The ridge enters once, here; every later norm uses these matrices as is.
struct CovarianceSet {
  double lambda = 1.0;
  int dim = 0;
  int horizon = 0;
  int num_pairs = 0;
  RidgeGram sigma_r;
  std::vector<RidgeGram> sigma_p;
};

CovarianceSet BuildCovariances(const PreferenceDataset& dataset,
                               const LinearParameterization& features,
                               double lambda = 1.0);

// Per-(h, s, a) uncertainty bonus split into its reward and transition parts:
//   reward = ||lift_h(psi(s,a))||_{sigma_r^-1},
//   transition = ||psi(s,a)||_{sigma_p[h]^-1}.
struct BonusTable {
  int horizon = 0;
  int num_states = 0;
  int num_joint = 0;
  std::vector<double> reward;      // [(h * S + s) * A + a]
  std::vector<double> transition;  // same layout

  double Total(int h, int s, int a) const {
    const std::size_t k = (static_cast<std::size_t>(h) * num_states + s) *
                              num_joint + a;
    return reward[k] + transition[k];
  }
};
BonusTable ComputeBonuses(const MarkovGame& game,
                          const CovarianceSet& covariances);
// Same, for games whose features are built separately.
BonusTable ComputeBonuses(const LinearParameterization& features,
                          const CovarianceSet& covariances);

struct Uncertainty {
  double total = 0.0;
  double reward_term = 0.0;
  double transition_term = 0.0;
};

// U_D(pi): expected summed bonus along pi, by occupancy DP.
Uncertainty PolicyUncertainty(const MarkovGame& game, const JointPolicy& policy,
                              const CovarianceSet& covariances);
Uncertainty PolicyUncertainty(const MarkovGame& game, const JointPolicy& policy,
                              const BonusTable& bonuses);

// Monte-Carlo estimate of U_D(pi): (mean, standard error).
std::pair<double, double> PolicyUncertaintyMonteCarlo(
    const MarkovGame& game, const JointPolicy& policy,
    const BonusTable& bonuses, int episodes, Rng& rng);

struct FixedOthers {
  int player = 0;
  JointPolicy others;  // only components j != player are read
};

// max over policies of U_D by backward DP on the per-step bonus. With
// fixed_others, only that player's component varies. The per-step objective
// is additive, so a deterministic maximizer exists and the DP returns one.
std::pair<Uncertainty, JointPolicy> MaxPolicyUncertainty(
    const MarkovGame& game, const BonusTable& bonuses,
    const std::optional<FixedOthers>& fixed_others = std::nullopt);
std::pair<Uncertainty, JointPolicy> MaxPolicyUncertainty(
    const MarkovGame& game, const CovarianceSet& covariances,
    const std::optional<FixedOthers>& fixed_others = std::nullopt);

struct CoverageReport {
  Uncertainty single;
  Uncertainty unilateral;
  int unilateral_player = 0;
  Uncertainty uniform;

  static std::string CsvHeader();
  std::string CsvRow() const;
};

CoverageReport BuildCoverageReport(const MarkovGame& game,
                                   const JointPolicy& pi_star,
                                   const CovarianceSet& covariances);
CoverageReport BuildCoverageReport(const MarkovGame& game,
                                   const JointPolicy& pi_star,
                                   const BonusTable& bonuses);

}  // namespace marlhf

#endif  // MARLHF_COVERAGE_H_
