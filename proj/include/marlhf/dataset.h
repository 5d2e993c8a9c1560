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

#ifndef MARLHF_DATASET_H_
#define MARLHF_DATASET_H_

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "marlhf/game.h"

namespace marlhf {

struct BehaviorSuite {
  JointPolicy expert;
  JointPolicy rookie;
  JointPolicy trivial;
  std::vector<JointPolicy> unilateral;  // one per replaced player
};

// expert: team-optimal DP policy, or the exact 2x2 equilibrium for one-step
// two-player constant-sum games. rookie: each player softmaxes its own
// action values against the expert at temperatures[0]. unilateral[i]: the
// expert with player i replaced by a rookie at temperatures[i % size].
BehaviorSuite DeriveBehaviorSuite(const MarkovGame& game,
                                  std::span<const double> temperatures);

// Per-player softmax of Q_i(h, s, a_i) / temperature, where Q_i is player i's
// action value with the other players and all later steps following `base`.
JointPolicy SoftenedPolicy(const MarkovGame& game, const JointPolicy& base,
                           double temperature);

// Component order everywhere: expert, unilateral, rookie, trivial.
using MixtureRatios = std::array<double, 4>;
inline constexpr std::array<const char*, 4> kComponentNames = {
    "expert", "unilateral", "rookie", "trivial"};

// Diversified, Mix-Unilateral, Mix-Expert, Pure-Expert.
MixtureRatios MixtureByName(const std::string& name);
const std::vector<std::string>& MixtureNames();

// Largest-remainder apportionment of `total` over the ratios.
std::array<int, 4> ApportionCounts(const MixtureRatios& ratios, int total);

// Oracle-side trajectory pool: carries realized rewards, never handed to
// learners.
struct TrajectoryPool {
  std::vector<Trajectory> trajectories;
  std::vector<std::string> tags;
  std::vector<std::pair<int, int>> pairs;
  std::vector<std::pair<std::string, int>> component_counts;
  std::string mixture;
  std::uint64_t seed = 0;
};

TrajectoryPool CollectDataset(const MarkovGame& game, const BehaviorSuite& suite,
                              const MixtureRatios& ratios,
                              int total_trajectories, int pairs_multiplier,
                              std::uint64_t seed);

// Pairs of independent episodes from an episode-level mixture; trajectory
// 2k and 2k + 1 form pair k.
TrajectoryPool CollectIndependentPairs(const MarkovGame& game,
                                       const PolicyMixture& behavior,
                                       int num_pairs, std::uint64_t seed);

// Learner-facing episode: indices only. No reward field exists on this type.
struct StepSequence {
  std::vector<int> states;         // H + 1
  std::vector<int> joint_actions;  // H
  bool operator==(const StepSequence&) const = default;
};

struct PreferencePair {
  StepSequence tau_a;
  StepSequence tau_b;
  std::vector<int> labels;  // +1: player i prefers tau_a
  std::string source_a;
  std::string source_b;
  bool operator==(const PreferencePair&) const = default;
};

struct DatasetMeta {
  std::string game_id;
  std::string mixture;
  double steepness = 1.0;
  std::string label_mode;
  std::uint64_t seed = 0;
  int num_players = 0;
  int horizon = 0;
  int total_trajectories = 0;
  std::vector<std::pair<std::string, int>> component_counts;
  std::vector<std::string> warnings;
  bool operator==(const DatasetMeta&) const = default;
};

struct PreferenceDataset {
  DatasetMeta meta;
  std::vector<PreferencePair> pairs;

  // Line-delimited records: header first, then one record per pair.
  std::string ToJsonl() const;
  static PreferenceDataset FromJsonl(const std::string& text);
  bool operator==(const PreferenceDataset&) const = default;
};

enum class LabelMode { kRaw, kStandardized };
std::string LabelModeName(LabelMode mode);
LabelMode ParseLabelMode(const std::string& name);

struct LabelConfig {
  double steepness = 5.0;
  LabelMode mode = LabelMode::kStandardized;
  std::uint64_t seed = 0;
};

// P(label_i = +1) = sigmoid(steepness * (z_i(tau_a) - z_i(tau_b))), z_i the
// mean-reward return of player i (standardized over the pool in
// standardized mode). Realized rewards do not leave this function.
PreferenceDataset LabelPreferences(const TrajectoryPool& pool,
                                   const MarkovGame& oracle,
                                   const LabelConfig& config);

double PreferenceProbability(double return_a, double return_b,
                             double steepness);

// Oracle helpers for evaluation code.
std::vector<double> SequenceReturns(const MarkovGame& game,
                                    const StepSequence& seq);
StepSequence ToSequence(const Trajectory& traj);

}  // namespace marlhf

#endif  // MARLHF_DATASET_H_
