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

#ifndef MARLHF_PIPELINE_H_
#define MARLHF_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "marlhf/coverage.h"
#include "marlhf/dataset.h"
#include "marlhf/game.h"
#include "marlhf/reward_model.h"

namespace marlhf {

struct GameSpec {
  // grid-spread | random-linear | counterexample-m1 | counterexample-m2 | file
  std::string builder = "grid-spread";
  int num_agents = 2;
  int grid_size = 3;
  int horizon = 5;
  int num_states = 2;                     // random-linear
  std::vector<int> action_counts = {2, 2};  // random-linear
  int dim = 4;                            // random-linear
  std::uint64_t game_seed = 0;            // random-linear
  std::string path;                       // file
};

struct ExperimentConfig {
  GameSpec game;
  std::string mixture = "Diversified";
  std::optional<MixtureRatios> ratios;  // overrides the named mixture
  int total_trajectories = 300;
  int pairs_multiplier = 1;
  std::vector<double> temperatures = {1.0};
  double steepness = 5.0;
  std::string label_mode = "standardized";
  RewardModelConfig reward;  // reward.seed is replaced per run
  double beta = 1.0;
  double kappa = 1.0;
  double floor = 0.0;
  double lambda = 1.0;
  double delta = 0.05;
  double c = 0.1;
  double c_p = 0.1;
  int eval_episodes = 1000;
  bool coverage = false;
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir = "runs";
  // Sweep grid; mixture sweeps read sweep_mixtures instead of sweep_values.
  std::string sweep_axis;
  std::vector<double> sweep_values;
  std::vector<std::string> sweep_mixtures;

  // Throws ConfigError on unknown keys, out-of-range values or missing files.
  static ExperimentConfig FromJson(const std::string& text);
  std::string ToJson() const;
  void Validate() const;
  // ToJson without out_dir, so relocated runs share it.
  std::string CanonicalJson() const;
  // SHA-256 of CanonicalJson.
  std::string Hash() const;
  std::string ShortHash() const { return Hash().substr(0, 16); }
};

ExperimentConfig LoadConfig(const std::filesystem::path& path);

MarkovGame BuildGame(const GameSpec& spec);

// Records every file written under a root directory with its digest.
class ArtifactLog {
 public:
  explicit ArtifactLog(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  // Writes root / relative and records it.
  void Write(const std::filesystem::path& relative, const std::string& bytes);
  void Merge(const ArtifactLog& other);
  // manifest.json content; the manifest does not list itself.
  std::string ManifestJson(const std::string& config_hash) const;
  const std::map<std::string, std::pair<std::string, std::size_t>>& entries()
      const {
    return entries_;
  }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::pair<std::string, std::size_t>> entries_;
};

// True when root/manifest.json exists, carries config_hash and every listed
// file is present with a matching digest.
bool ManifestValid(const std::filesystem::path& root,
                   const std::string& config_hash);

// Oracle-side pool round trip (carries realized rewards).
std::string SavePoolJson(const TrajectoryPool& pool,
                         const std::string& config_hash);
TrajectoryPool LoadPoolJson(const std::string& text);

// In-memory building blocks shared by the stages.
TrajectoryPool GeneratePool(const MarkovGame& game, const ExperimentConfig& config,
                            std::uint64_t seed);
PreferenceDataset LabelPool(const TrajectoryPool& pool, const MarkovGame& game,
                            const ExperimentConfig& config, std::uint64_t seed);
// config.reward with the per-run seed filled in.
RewardModelConfig RewardConfigFor(const ExperimentConfig& config,
                                  std::uint64_t seed);

// Pipeline stages. Each reads its inputs from `dir` (files written by the
// earlier stages) and writes its outputs there through `log`. Failures are
// rethrown as StageError carrying the stage name.
void StageMakeGame(const ExperimentConfig& config, ArtifactLog& log);
void StageGenerateData(const ExperimentConfig& config, std::uint64_t seed,
                       ArtifactLog& log);
void StageLabel(const ExperimentConfig& config, std::uint64_t seed,
                ArtifactLog& log);
void StageFitReward(const ExperimentConfig& config, std::uint64_t seed,
                    ArtifactLog& log);
void StageFitReference(const ExperimentConfig& config, ArtifactLog& log);
void StageTrain(const ExperimentConfig& config, ArtifactLog& log);

struct RunResult {
  std::uint64_t seed = 0;
  std::string status = "ok";  // or "failed:<stage>"
  std::string error;
  double mean_return = 0.0;
  double mc_return = 0.0;
  double mc_stderr = 0.0;
  double nash_gap = 0.0;
  double expert_return = 0.0;
  double trivial_return = 0.0;
  double reward_mse = 0.0;
  double train_nll = 0.0;
  double holdout_accuracy = 0.0;
  double smoothness = 0.0;
  bool degenerate = false;
  // Visited (h, i, s) where the greedy action equals the reference argmax.
  int ref_agreement = 0;
  double vdn_residual = 0.0;
  std::optional<CoverageReport> coverage;

  bool ok() const { return status == "ok"; }
};

// Evaluation stage: writes eval.csv and returns the metrics of the run.
RunResult StageEvaluate(const ExperimentConfig& config, std::uint64_t seed,
                        ArtifactLog& log);

// gen -> label -> fit reward -> fit reference -> train -> evaluate in
// log.root(). A stage failure is reported in the result, not thrown; files
// from completed stages stay on disk.
RunResult RunSingle(const ExperimentConfig& config, std::uint64_t seed,
                    ArtifactLog& log);

struct PipelineOutcome {
  std::filesystem::path run_dir;
  std::string config_hash;
  std::vector<RunResult> runs;
  bool cache_hit = false;
  bool ok() const;
};

// One run per seed under out_dir/<short hash>/seed_<s>, then metrics.csv
// (one row per seed plus a summary row) and manifest.json. A valid manifest
// for the same hash is a cache hit: nothing is rerun and the metrics are
// read back.
PipelineOutcome RunPipeline(const ExperimentConfig& config, int workers = 1);

std::string MetricsCsv(const std::string& config_hash,
                       const std::vector<RunResult>& runs);

struct CounterexampleSeed {
  std::uint64_t seed = 0;
  double gap_m1 = 0.0;
  double gap_m2 = 0.0;
  double max_gap = 0.0;
  bool same_output = true;      // surrogate minimizer agrees under both views
  bool identical_data = true;   // labelled datasets byte-identical
  double u_star_m1 = 0.0;       // U_D(pi*) with the n-pair data
  double u_star_m2 = 0.0;
  double u_star_reference = 0.0;  // same, with the 200-pair data
  std::vector<int> output_joint;  // chosen joint action
};

struct CounterexampleReport {
  int num_pairs = 0;
  std::vector<CounterexampleSeed> seeds;
  double fraction_at_least = 0.0;  // share of seeds with max_gap >= 0.45

  std::string Csv() const;
};

CounterexampleReport RunCounterexample(int num_pairs,
                                       const std::vector<std::uint64_t>& seeds,
                                       double c = 0.1, double c_p = 0.1);

struct SweepOutcome {
  std::string axis;
  std::vector<std::string> labels;  // one per grid point
  std::vector<std::vector<RunResult>> results;  // [point][seed]
  std::vector<std::string> failures;
  std::filesystem::path dir;
};

// One pipeline per grid point and seed on a worker pool; writes
// sweep_<axis>.csv and one SVG per metric under out_dir/sweep_<axis>_<hash>.
SweepOutcome RunSweep(const ExperimentConfig& config, const std::string& axis,
                      int workers = 1);

std::string SweepCsv(const SweepOutcome& sweep, const std::string& config_hash);

// Regenerates the plots of a sweep CSV into dir; returns the files written.
std::vector<std::string> PlotSweepCsv(const std::string& csv_text,
                                      const std::filesystem::path& dir,
                                      ArtifactLog* log = nullptr);

}  // namespace marlhf

#endif  // MARLHF_PIPELINE_H_
