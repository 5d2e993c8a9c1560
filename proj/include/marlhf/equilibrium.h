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

#ifndef MARLHF_EQUILIBRIUM_H_
#define MARLHF_EQUILIBRIUM_H_

#include <string>
#include <vector>

#include "marlhf/game.h"

namespace marlhf {

struct BestResponse {
  double value = 0.0;  // V^{dagger, pi_{-i}}_{1,i}(s_1)
  // The input policy with player i's component replaced by the maximizing
  // deterministic policy.
  JointPolicy policy;
};

// Exact best response by backward DP on the MDP induced by fixing the other
// players. Ties go to the lowest action index.
BestResponse BestResponseValue(const MarkovGame& game, const JointPolicy& policy,
                               int player);

struct NashGapReport {
  std::vector<double> best_response;
  std::vector<double> policy_value;
  std::vector<double> gap;      // clipped at 0
  std::vector<double> raw_gap;  // before clipping
  double total_gap = 0.0;

  std::string CsvHeader() const;
  std::string CsvRow() const;
};

NashGapReport NashGap(const MarkovGame& game, const JointPolicy& policy);

// Exact equilibrium of a one-step two-player game with two actions each whose
// payoffs sum to a constant. Pure profiles are checked first, then the mixed
// closed form. Throws ConfigError on inputs outside that class.
JointPolicy SolveMatrixNash2x2(const MarkovGame& game);
bool IsConstantSum2x2(const MarkovGame& game, double tol = 1e-9);

// Deterministic policy maximizing the sum of all players' returns by backward
// DP over joint actions. team_q is [(h * S + s) * |A| + a].
struct TeamSolution {
  JointPolicy policy;
  std::vector<double> team_q;
  double value = 0.0;
};
TeamSolution TeamOptimalPolicy(const MarkovGame& game);

}  // namespace marlhf

#endif  // MARLHF_EQUILIBRIUM_H_
