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

// marlhf: command-line driver for the preference-based offline MARL toolkit.
//
// Stage subcommands (make-game, gen-data, label, fit-reward, fit-ref, train,
// eval) work inside --out-dir and read the files the previous stage wrote
// there. `run` chains all of them per seed, `sweep` over a grid.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "marlhf/acceptance.h"
#include "marlhf/coverage.h"
#include "marlhf/equilibrium.h"
#include "marlhf/pipeline.h"
#include "marlhf/report.h"
#include "marlhf/reward_mle.h"
#include "marlhf/theory.h"

namespace fs = std::filesystem;
using namespace marlhf;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;
constexpr int kExitVerify = 4;

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int workers = 1;
  bool trace = false;
};

ExperimentConfig ResolveConfig(const Globals& g) {
  ExperimentConfig config =
      g.config_path.empty() ? ExperimentConfig{} : LoadConfig(g.config_path);
  if (g.seed) config.seeds = {*g.seed};
  if (!g.out_dir.empty()) config.out_dir = g.out_dir;
  config.Validate();
  return config;
}

std::uint64_t StageSeed(const ExperimentConfig& config) { return config.seeds.front(); }

int Theory(const ExperimentConfig& config, const Globals& g) {
  ArtifactLog log(config.out_dir);
  const MarkovGame game = LoadGameJson(ReadFile(log.root() / "game.json"));
  const PreferenceDataset dataset =
      PreferenceDataset::FromJsonl(ReadFile(log.root() / "dataset.jsonl"));
  const LinearParameterization features =
      game.has_features() ? game.features() : AnchoredOneHotFeatures(game);
  MleConfig mle;
  mle.lambda = config.lambda;
  mle.delta = config.delta;
  mle.c = config.c;
  const RewardEstimate estimate = FitLinearMle(dataset, features, mle);
  const CovarianceSet cov = BuildCovariances(dataset, features, config.lambda);
  TheoryConfig tc;
  tc.lambda = config.lambda;
  tc.delta = config.delta;
  tc.c_p = config.c_p;
  const TheoryContext context(dataset, features, cov, estimate, tc);
  std::ostringstream trace;
  const SurrogateResult best = SurrogateMinimize(context, game.shape(), game.initial_state(),
                                                 tc, g.trace ? &trace : nullptr);
  const NashGapReport gap = NashGap(game, best.policy);
  const double bound = UnilateralBound(context, game, best.policy);
  const std::string hash = config.Hash();

  CsvTable table({"config_hash", "num_pairs", "candidates", "chosen", "surrogate",
                  "nash_gap", "unilateral_bound", "reward_radius", "transition_constant"});
  table.Row().Add(hash).Add(static_cast<int>(dataset.pairs.size()))
      .Add(std::to_string(best.num_candidates)).Add(std::to_string(best.candidate_index))
      .Add(best.surrogate).Add(gap.total_gap).Add(bound)
      .Add(context.reward_radius()).Add(context.transition_constant());
  log.Write("theory.csv", table.ToString());
  log.Write("theory_policy.json", SavePolicyJson(best.policy));
  if (g.trace) log.Write("theory_trace.csv", trace.str());
  std::cout << table.ToString();
  return 0;
}

int Report(const std::string& input, const ExperimentConfig& config) {
  const std::string text = ReadFile(input);
  const CsvData data = ParseCsv(text);
  if (data.Column("axis") >= 0) {
    for (const auto& name : PlotSweepCsv(text, config.out_dir)) {
      std::cout << (fs::path(config.out_dir) / name).string() << "\n";
    }
    return 0;
  }
  // Metrics CSV: print the summary columns.
  for (const char* col : {"seed", "status", "mean_return", "nash_gap", "reward_mse",
                          "holdout_accuracy", "degenerate"}) {
    std::cout << col << (std::string(col) == "degenerate" ? "\n" : "\t");
  }
  for (const auto& row : data.rows) {
    bool first = true;
    for (const char* col : {"seed", "status", "mean_return", "nash_gap", "reward_mse",
                            "holdout_accuracy", "degenerate"}) {
      const int c = data.Column(col);
      std::cout << (first ? "" : "\t") << (c >= 0 ? row[c] : "");
      first = false;
    }
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-based offline multi-agent RL toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed; replaces the config's seed list");
  app.add_option("--out-dir", g.out_dir, "Output / working directory");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--trace", g.trace, "Write per-candidate surrogate trace");

  auto* make_game = app.add_subcommand("make-game", "Build the game and write game.json");
  auto* gen_data = app.add_subcommand("gen-data", "Roll out the behavior mixture (pool.json)");
  auto* label = app.add_subcommand("label", "Label preference pairs (dataset.jsonl)");
  auto* fit_reward = app.add_subcommand("fit-reward", "Train the reward model");
  auto* fit_ref = app.add_subcommand("fit-ref", "Fit the reference policy");
  auto* train = app.add_subcommand("train", "Fitted-Q training of the final policy");
  auto* eval = app.add_subcommand("eval", "Evaluate policy.json against the game");
  auto* run = app.add_subcommand("run", "Full pipeline for every configured seed");
  auto* theory = app.add_subcommand("theory", "Surrogate minimization on dataset.jsonl");
  auto* counterexample = app.add_subcommand("counterexample", "Two-game impossibility check");
  int ce_pairs = 2000, ce_seeds = 10;
  counterexample->add_option("--pairs", ce_pairs, "Preference pairs")->check(CLI::Range(100, 10000000));
  counterexample->add_option("--num-seeds", ce_seeds, "Seeds 0..n-1")->check(CLI::PositiveNumber);
  auto* sweep = app.add_subcommand("sweep", "Sweep one axis of the config");
  std::string axis;
  sweep->add_option("--axis", axis, "alpha | beta | mixture | N");
  auto* report = app.add_subcommand("report", "Plots / summary from a sweep or metrics CSV");
  std::string report_input;
  report->add_option("--input", report_input, "CSV file")->required()->check(CLI::ExistingFile);
  auto* verify = app.add_subcommand("verify", "Run acceptance checks 1-5");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    ExperimentConfig config = ResolveConfig(g);
    ArtifactLog log(config.out_dir);
    if (make_game->parsed()) {
      StageMakeGame(config, log);
    } else if (gen_data->parsed()) {
      StageGenerateData(config, StageSeed(config), log);
    } else if (label->parsed()) {
      StageLabel(config, StageSeed(config), log);
    } else if (fit_reward->parsed()) {
      StageFitReward(config, StageSeed(config), log);
    } else if (fit_ref->parsed()) {
      StageFitReference(config, log);
    } else if (train->parsed()) {
      StageTrain(config, log);
    } else if (eval->parsed()) {
      const RunResult r = StageEvaluate(config, StageSeed(config), log);
      std::cout << MetricsCsv(config.Hash(), {r});
    } else if (run->parsed()) {
      const PipelineOutcome outcome = RunPipeline(config, g.workers);
      std::cout << ReadFile(outcome.run_dir / "metrics.csv");
      spdlog::info("artifacts in {}{}", outcome.run_dir.string(),
                   outcome.cache_hit ? " (cache hit)" : "");
      return outcome.ok() ? 0 : kExitStage;
    } else if (theory->parsed()) {
      return Theory(config, g);
    } else if (counterexample->parsed()) {
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < ce_seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      const CounterexampleReport r = RunCounterexample(ce_pairs, seeds, config.c, config.c_p);
      const std::string csv = r.Csv();
      log.Write("counterexample.csv", csv);
      std::cout << csv;
    } else if (sweep->parsed()) {
      const std::string which = axis.empty() ? config.sweep_axis : axis;
      if (which.empty()) throw ConfigError("no sweep axis given");
      const SweepOutcome outcome = RunSweep(config, which, g.workers);
      std::cout << ReadFile(outcome.dir / fmt::format("sweep_{}.csv", which));
      for (const auto& f : outcome.failures) spdlog::warn("grid point failed: {}", f);
    } else if (report->parsed()) {
      return Report(report_input, config);
    } else if (verify->parsed()) {
      AcceptanceOptions options;
      options.work_dir = config.out_dir;
      options.workers = g.workers;
      options.c = config.c;
      options.c_p = config.c_p;
      bool all = true;
      for (int id = 1; id <= 5; ++id) {
        const CriterionResult r = CheckCriterion(id, options);
        std::cout << r.Line() << std::endl;
        all &= r.passed;
      }
      return all ? 0 : kExitVerify;
    }
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const SizingError& e) {
    spdlog::error("config error: {}", e.what());
    return kExitConfig;
  } catch (const StageError& e) {
    spdlog::error("stage {} failed: {}", e.stage(), e.what());
    return kExitStage;
  } catch (const std::exception& e) {
    spdlog::error("failed: {}", e.what());
    return kExitStage;
  }
  return 0;
}
