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

#ifndef MARLHF_ACCEPTANCE_H_
#define MARLHF_ACCEPTANCE_H_

#include <filesystem>
#include <string>
#include <vector>

#include "marlhf/game.h"

namespace marlhf {

// End-to-end checks of the library's headline guarantees, numbered 1..9.
struct AcceptanceOptions {
  std::filesystem::path work_dir = "acceptance_work";
  // CLI executable; check 9 runs `<cli> verify` when set.
  std::string cli_path;
  int workers = 1;
  double c = 0.1;    // reward confidence constant
  double c_p = 0.1;  // transition bonus constant
  // Reward confidence constant for check 2. The confidence event needs a
  // larger constant than the one the surrogate minimizer runs with.
  double sandwich_c = 1.0;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;

  // "criterion <id> <name>: PASS|FAIL (<seconds>s / <budget>s) <detail>"
  std::string Line() const;
};

CriterionResult CheckCriterion(int id, const AcceptanceOptions& options);

// Repeated two-state, two-step prisoner's dilemma with uniform transitions
// and anchored one-hot features. Defecting is strictly dominant, so the
// all-defect profile is the unique equilibrium.
MarkovGame BuildDilemmaGame();

}  // namespace marlhf

#endif  // MARLHF_ACCEPTANCE_H_
