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

#include "marlhf/pipeline.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "marlhf/equilibrium.h"
#include "marlhf/offline_marl.h"
#include "marlhf/report.h"
#include "marlhf/reward_mle.h"
#include "marlhf/theory.h"

namespace marlhf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Seed streams per run.
constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kLabelStream = 2;
constexpr std::uint64_t kRewardStream = 3;
constexpr std::uint64_t kEvalStream = 4;

void RejectUnknown(const json& obj, const std::set<std::string>& known,
                   const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void Read(const json& obj, const char* key, T& out) {
  auto it = obj.find(key);
  if (it == obj.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("bad value for '{}': {}", key, e.what()));
  }
}

void Require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

// Runs fn(k) for k in [0, n) on up to `workers` threads.
void ParallelFor(int n, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (int k = next++; k < n; k = next++) fn(k);
    });
  }
  for (auto& t : threads) t.join();
}

template <typename F>
auto Guard(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

std::string Input(const ArtifactLog& log, const char* name) {
  const fs::path path = log.root() / name;
  if (!fs::exists(path)) {
    throw ConfigError(fmt::format("missing input {} (run the earlier stage first)",
                                  path.string()));
  }
  return ReadFile(path);
}

MarkovGame LoadGame(const ArtifactLog& log) {
  return LoadGameJson(Input(log, "game.json"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig ExperimentConfig::FromJson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RejectUnknown(doc,
                {"game", "mixture", "ratios", "total_trajectories",
                 "pairs_multiplier", "temperatures", "steepness", "label_mode",
                 "reward", "beta", "kappa", "floor", "lambda", "delta", "c",
                 "c_p", "eval_episodes", "coverage", "seeds", "out_dir",
                 "sweep"},
                "config");
  ExperimentConfig config;
  if (doc.contains("game")) {
    const json& g = doc["game"];
    RejectUnknown(g,
                  {"builder", "num_agents", "grid_size", "horizon",
                   "num_states", "action_counts", "dim", "game_seed", "path"},
                  "game");
    Read(g, "builder", config.game.builder);
    Read(g, "num_agents", config.game.num_agents);
    Read(g, "grid_size", config.game.grid_size);
    Read(g, "horizon", config.game.horizon);
    Read(g, "num_states", config.game.num_states);
    Read(g, "action_counts", config.game.action_counts);
    Read(g, "dim", config.game.dim);
    Read(g, "game_seed", config.game.game_seed);
    Read(g, "path", config.game.path);
  }
  Read(doc, "mixture", config.mixture);
  if (doc.contains("ratios") && !doc["ratios"].is_null()) {
    MixtureRatios ratios{};
    Read(doc, "ratios", ratios);
    config.ratios = ratios;
  }
  Read(doc, "total_trajectories", config.total_trajectories);
  Read(doc, "pairs_multiplier", config.pairs_multiplier);
  Read(doc, "temperatures", config.temperatures);
  Read(doc, "steepness", config.steepness);
  Read(doc, "label_mode", config.label_mode);
  if (doc.contains("reward")) {
    const json& r = doc["reward"];
    RejectUnknown(r,
                  {"alpha", "hidden", "epochs", "batch_size", "learning_rate",
                   "holdout_fraction", "degeneracy_threshold"},
                  "reward");
    Read(r, "alpha", config.reward.alpha);
    Read(r, "hidden", config.reward.hidden);
    Read(r, "epochs", config.reward.epochs);
    Read(r, "batch_size", config.reward.batch_size);
    Read(r, "learning_rate", config.reward.learning_rate);
    Read(r, "holdout_fraction", config.reward.holdout_fraction);
    Read(r, "degeneracy_threshold", config.reward.degeneracy_threshold);
  }
  Read(doc, "beta", config.beta);
  Read(doc, "kappa", config.kappa);
  Read(doc, "floor", config.floor);
  Read(doc, "lambda", config.lambda);
  Read(doc, "delta", config.delta);
  Read(doc, "c", config.c);
  Read(doc, "c_p", config.c_p);
  Read(doc, "eval_episodes", config.eval_episodes);
  Read(doc, "coverage", config.coverage);
  Read(doc, "seeds", config.seeds);
  Read(doc, "out_dir", config.out_dir);
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    RejectUnknown(s, {"axis", "values", "mixtures"}, "sweep");
    Read(s, "axis", config.sweep_axis);
    Read(s, "values", config.sweep_values);
    Read(s, "mixtures", config.sweep_mixtures);
  }
  config.Validate();
  return config;
}

std::string ExperimentConfig::ToJson() const {
  json doc;
  doc["game"] = {{"builder", game.builder},
                 {"num_agents", game.num_agents},
                 {"grid_size", game.grid_size},
                 {"horizon", game.horizon},
                 {"num_states", game.num_states},
                 {"action_counts", game.action_counts},
                 {"dim", game.dim},
                 {"game_seed", game.game_seed},
                 {"path", game.path}};
  doc["mixture"] = mixture;
  doc["ratios"] = ratios ? json(*ratios) : json(nullptr);
  doc["total_trajectories"] = total_trajectories;
  doc["pairs_multiplier"] = pairs_multiplier;
  doc["temperatures"] = temperatures;
  doc["steepness"] = steepness;
  doc["label_mode"] = label_mode;
  doc["reward"] = {{"alpha", reward.alpha},
                   {"hidden", reward.hidden},
                   {"epochs", reward.epochs},
                   {"batch_size", reward.batch_size},
                   {"learning_rate", reward.learning_rate},
                   {"holdout_fraction", reward.holdout_fraction},
                   {"degeneracy_threshold", reward.degeneracy_threshold}};
  doc["beta"] = beta;
  doc["kappa"] = kappa;
  doc["floor"] = floor;
  doc["lambda"] = lambda;
  doc["delta"] = delta;
  doc["c"] = c;
  doc["c_p"] = c_p;
  doc["eval_episodes"] = eval_episodes;
  doc["coverage"] = coverage;
  doc["seeds"] = seeds;
  doc["out_dir"] = out_dir;
  doc["sweep"] = {{"axis", sweep_axis},
                  {"values", sweep_values},
                  {"mixtures", sweep_mixtures}};
  return doc.dump(2) + "\n";
}

void ExperimentConfig::Validate() const {
  static const std::set<std::string> kBuilders = {
      "grid-spread", "random-linear", "counterexample-m1", "counterexample-m2",
      "file"};
  Require(kBuilders.count(game.builder) > 0, "unknown game builder " + game.builder);
  if (game.builder == "file") {
    Require(!game.path.empty() && fs::exists(game.path),
            "game file not found: " + game.path);
  }
  Require(game.horizon >= 1 && game.horizon <= 50, "game.horizon must be in [1, 50]");
  Require(game.num_agents >= 2 && game.num_agents <= 4,
          "game.num_agents must be in [2, 4]");
  Require(game.grid_size >= 2 && game.grid_size <= 8,
          "game.grid_size must be in [2, 8]");
  Require(game.num_states >= 1 && game.num_states <= 10000,
          "game.num_states must be in [1, 10000]");
  Require(!game.action_counts.empty(), "game.action_counts must be nonempty");
  for (int a : game.action_counts) Require(a >= 1 && a <= 32, "action counts must be in [1, 32]");
  Require(game.dim >= 1 && game.dim <= 256, "game.dim must be in [1, 256]");
  if (ratios) {
    double total = 0.0;
    for (double r : *ratios) {
      Require(r >= 0.0 && std::isfinite(r), "ratios must be nonnegative");
      total += r;
    }
    Require(total > 0.0, "ratios must not all be zero");
  } else {
    const auto& names = MixtureNames();
    Require(std::find(names.begin(), names.end(), mixture) != names.end(),
            "unknown mixture " + mixture);
  }
  Require(total_trajectories >= 2 && total_trajectories <= 1'000'000,
          "total_trajectories must be in [2, 1e6]");
  Require(pairs_multiplier >= 1 && pairs_multiplier <= 100,
          "pairs_multiplier must be in [1, 100]");
  Require(!temperatures.empty(), "temperatures must be nonempty");
  for (double t : temperatures) Require(t > 0.0, "temperatures must be positive");
  Require(steepness > 0.0, "steepness must be positive");
  ParseLabelMode(label_mode);
  Require(reward.alpha >= 0.0, "reward.alpha must be >= 0");
  Require(reward.hidden >= 1 && reward.hidden <= 4096, "reward.hidden must be in [1, 4096]");
  Require(reward.epochs >= 1, "reward.epochs must be >= 1");
  Require(reward.batch_size >= 1, "reward.batch_size must be >= 1");
  Require(reward.learning_rate > 0.0, "reward.learning_rate must be positive");
  Require(reward.holdout_fraction >= 0.0 && reward.holdout_fraction < 1.0,
          "reward.holdout_fraction must be in [0, 1)");
  Require(beta >= 0.0, "beta must be >= 0");
  Require(kappa > 0.0, "kappa must be positive");
  Require(lambda > 0.0, "lambda must be positive");
  Require(delta > 0.0 && delta < 1.0, "delta must be in (0, 1)");
  Require(c > 0.0, "c must be positive");
  Require(c_p >= 0.0, "c_p must be >= 0");
  Require(eval_episodes >= 0, "eval_episodes must be >= 0");
  Require(!seeds.empty(), "seeds must be nonempty");
  static const std::set<std::string> kAxes = {"", "alpha", "beta", "mixture", "N"};
  Require(kAxes.count(sweep_axis) > 0, "unknown sweep axis " + sweep_axis);
  for (const auto& name : sweep_mixtures) MixtureByName(name);
}

std::string ExperimentConfig::CanonicalJson() const {
  json doc = json::parse(ToJson());
  doc.erase("out_dir");
  return doc.dump(2) + "\n";
}

std::string ExperimentConfig::Hash() const { return Sha256Hex(CanonicalJson()); }

ExperimentConfig LoadConfig(const fs::path& path) {
  return ExperimentConfig::FromJson(ReadFile(path));
}

MarkovGame BuildGame(const GameSpec& spec) {
  if (spec.builder == "grid-spread") {
    GridSpreadParams params;
    params.num_agents = spec.num_agents;
    params.grid_size = spec.grid_size;
    params.horizon = spec.horizon;
    params.feature_budget = 0;  // one-hot features are built on demand
    return BuildGridSpread(params);
  }
  if (spec.builder == "random-linear") {
    RandomLinearGameParams params;
    params.num_players = static_cast<int>(spec.action_counts.size());
    params.horizon = spec.horizon;
    params.num_states = spec.num_states;
    params.action_counts = spec.action_counts;
    params.dim = spec.dim;
    params.seed = spec.game_seed;
    return BuildRandomLinearGame(params);
  }
  if (spec.builder == "counterexample-m1") return BuildCounterexample().m1;
  if (spec.builder == "counterexample-m2") return BuildCounterexample().m2;
  if (spec.builder == "file") return LoadGameJson(ReadFile(spec.path));
  throw ConfigError("unknown game builder " + spec.builder);
}

// ---------------------------------------------------------------------------
// Artifacts

void ArtifactLog::Write(const fs::path& relative, const std::string& bytes) {
  WriteFile(root_ / relative, bytes);
  entries_[relative.generic_string()] = {Sha256Hex(bytes), bytes.size()};
}

void ArtifactLog::Merge(const ArtifactLog& other) {
  const fs::path prefix = other.root().lexically_relative(root_);
  for (const auto& [path, entry] : other.entries()) {
    entries_[(prefix / path).lexically_normal().generic_string()] = entry;
  }
}

std::string ArtifactLog::ManifestJson(const std::string& config_hash) const {
  json doc;
  doc["schema"] = "marlhf.manifest/1";
  doc["config_hash"] = config_hash;
  json files = json::array();
  for (const auto& [path, entry] : entries_) {
    files.push_back({{"path", path}, {"sha256", entry.first}, {"bytes", entry.second}});
  }
  doc["files"] = std::move(files);
  return doc.dump(2) + "\n";
}

bool ManifestValid(const fs::path& root, const std::string& config_hash) {
  const fs::path path = root / "manifest.json";
  if (!fs::exists(path)) return false;
  try {
    const json doc = json::parse(ReadFile(path));
    if (doc.value("config_hash", "") != config_hash) return false;
    for (const auto& file : doc.at("files")) {
      const fs::path p = root / file.at("path").get<std::string>();
      if (!fs::exists(p)) return false;
      if (Sha256Hex(ReadFile(p)) != file.at("sha256").get<std::string>()) return false;
    }
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::string SavePoolJson(const TrajectoryPool& pool, const std::string& config_hash) {
  json doc;
  doc["schema"] = "marlhf.pool/1";
  doc["config_hash"] = config_hash;
  doc["mixture"] = pool.mixture;
  doc["seed"] = pool.seed;
  doc["tags"] = pool.tags;
  doc["pairs"] = pool.pairs;
  doc["component_counts"] = pool.component_counts;
  json trajs = json::array();
  for (const Trajectory& t : pool.trajectories) {
    trajs.push_back({{"states", t.states},
                     {"actions", t.joint_actions},
                     {"rewards", t.realized_rewards.value_or(std::vector<double>{})}});
  }
  doc["trajectories"] = std::move(trajs);
  return doc.dump() + "\n";
}

TrajectoryPool LoadPoolJson(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("schema", "") != "marlhf.pool/1") {
    throw ConfigError("not a marlhf.pool/1 document");
  }
  TrajectoryPool pool;
  pool.mixture = doc.at("mixture").get<std::string>();
  pool.seed = doc.at("seed").get<std::uint64_t>();
  pool.tags = doc.at("tags").get<std::vector<std::string>>();
  pool.pairs = doc.at("pairs").get<std::vector<std::pair<int, int>>>();
  pool.component_counts =
      doc.at("component_counts").get<std::vector<std::pair<std::string, int>>>();
  for (const auto& t : doc.at("trajectories")) {
    Trajectory traj;
    traj.states = t.at("states").get<std::vector<int>>();
    traj.joint_actions = t.at("actions").get<std::vector<int>>();
    auto rewards = t.at("rewards").get<std::vector<double>>();
    if (!rewards.empty()) traj.realized_rewards = std::move(rewards);
    pool.trajectories.push_back(std::move(traj));
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Stages

void StageMakeGame(const ExperimentConfig& config, ArtifactLog& log) {
  Guard("make-game", [&] {
    log.Write("game.json", SaveGameJson(BuildGame(config.game)));
  });
}

TrajectoryPool GeneratePool(const MarkovGame& game, const ExperimentConfig& config,
                            std::uint64_t seed) {
  const BehaviorSuite suite = DeriveBehaviorSuite(game, config.temperatures);
  const MixtureRatios ratios =
      config.ratios ? *config.ratios : MixtureByName(config.mixture);
  TrajectoryPool pool =
      CollectDataset(game, suite, ratios, config.total_trajectories,
                     config.pairs_multiplier, DeriveSeed(seed, kDataStream));
  pool.mixture = config.ratios ? "custom" : config.mixture;
  return pool;
}

PreferenceDataset LabelPool(const TrajectoryPool& pool, const MarkovGame& game,
                            const ExperimentConfig& config, std::uint64_t seed) {
  LabelConfig label;
  label.steepness = config.steepness;
  label.mode = ParseLabelMode(config.label_mode);
  label.seed = DeriveSeed(seed, kLabelStream);
  return LabelPreferences(pool, game, label);
}

RewardModelConfig RewardConfigFor(const ExperimentConfig& config,
                                  std::uint64_t seed) {
  RewardModelConfig rc = config.reward;
  rc.seed = DeriveSeed(seed, kRewardStream);
  return rc;
}

void StageGenerateData(const ExperimentConfig& config, std::uint64_t seed,
                       ArtifactLog& log) {
  Guard("gen-data", [&] {
    const MarkovGame game = LoadGame(log);
    log.Write("pool.json", SavePoolJson(GeneratePool(game, config, seed), config.Hash()));
  });
}

void StageLabel(const ExperimentConfig& config, std::uint64_t seed,
                ArtifactLog& log) {
  Guard("label", [&] {
    const MarkovGame game = LoadGame(log);
    const TrajectoryPool pool = LoadPoolJson(Input(log, "pool.json"));
    log.Write("dataset.jsonl", LabelPool(pool, game, config, seed).ToJsonl());
  });
}

void StageFitReward(const ExperimentConfig& config, std::uint64_t seed,
                    ArtifactLog& log) {
  Guard("fit-reward", [&] {
    const MarkovGame game = LoadGame(log);
    const PreferenceDataset dataset =
        PreferenceDataset::FromJsonl(Input(log, "dataset.jsonl"));
    const PracticalRewardModel model = TrainPracticalReward(
        dataset, StateActionEncoder(game), RewardConfigFor(config, seed));
    const std::string hash = config.Hash();
    log.Write("reward_model.json", model.ToJson(hash));
    CsvTable table({"config_hash", "epoch", "player", "nll", "mse", "loss", "variance"});
    for (const EpochLog& e : model.log()) {
      table.Row().Add(hash).Add(e.epoch).Add(e.player).Add(e.nll).Add(e.mse)
          .Add(e.loss).Add(e.variance);
    }
    log.Write("reward_log.csv", table.ToString());
  });
}

void StageFitReference(const ExperimentConfig& config, ArtifactLog& log) {
  Guard("fit-ref", [&] {
    const MarkovGame game = LoadGame(log);
    const PreferenceDataset dataset =
        PreferenceDataset::FromJsonl(Input(log, "dataset.jsonl"));
    log.Write("reference.json",
              FitReference(dataset, game.shape(), config.kappa).ToJson(config.Hash()));
  });
}

void StageTrain(const ExperimentConfig& config, ArtifactLog& log) {
  Guard("train", [&] {
    const MarkovGame game = LoadGame(log);
    const PreferenceDataset dataset =
        PreferenceDataset::FromJsonl(Input(log, "dataset.jsonl"));
    const PracticalRewardModel model =
        PracticalRewardModel::FromJson(Input(log, "reward_model.json"));
    const ReferencePolicy reference =
        ReferencePolicy::FromJson(Input(log, "reference.json"));
    const GameShape& shape = game.shape();
    const double beta = config.beta;
    StepReward reward = [&](int h, int s, int joint) {
      return ShapedReward(model.Standardized(shape, s, joint), reference, beta, h,
                          s, joint);
    };
    VdnConfig vdn;
    vdn.floor = config.floor;
    const VdnQ q = FittedQVdn(dataset, shape, reward, vdn);
    const std::string hash = config.Hash();
    log.Write("vdn.json", q.ToJson(hash));
    log.Write("policy.json", SavePolicyJson(q.Greedy()));
  });
}

namespace {

double Mean(const std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  return v.empty() ? 0.0 : total / v.size();
}

}  // namespace

RunResult StageEvaluate(const ExperimentConfig& config, std::uint64_t seed,
                        ArtifactLog& log) {
  return Guard("eval", [&] {
    const MarkovGame game = LoadGame(log);
    const JointPolicy policy = LoadPolicyJson(Input(log, "policy.json"));
    const PreferenceDataset dataset =
        PreferenceDataset::FromJsonl(Input(log, "dataset.jsonl"));
    const PracticalRewardModel model =
        PracticalRewardModel::FromJson(Input(log, "reward_model.json"));
    const ReferencePolicy reference =
        ReferencePolicy::FromJson(Input(log, "reference.json"));
    const VdnQ q = VdnQ::FromJson(Input(log, "vdn.json"));
    const BehaviorSuite suite = DeriveBehaviorSuite(game, config.temperatures);

    RunResult result;
    result.seed = seed;
    const PolicyEvaluation eval = EvaluatePolicy(
        game, policy, config.eval_episodes, DeriveSeed(seed, kEvalStream));
    result.mean_return = eval.MeanReturn();
    result.mc_return = Mean(eval.mc_return);
    result.mc_stderr = Mean(eval.mc_stderr);
    result.nash_gap = eval.nash_gap.total_gap;
    result.expert_return = Mean(InitialValues(game, suite.expert));
    result.trivial_return = Mean(InitialValues(game, JointPolicy::Uniform(game.shape())));
    const std::vector<StepSequence> probe = HoldoutSequences(model, dataset);
    result.reward_mse = probe.empty() ? 0.0 : RewardMseMetric(model, game, probe);
    const RewardModelMetrics& m = model.metrics();
    result.train_nll = m.train_nll;
    result.holdout_accuracy = m.holdout_accuracy;
    result.smoothness = m.smoothness;
    result.degenerate = m.degenerate;
    result.ref_agreement = ReferenceAgreement(policy, reference);
    result.vdn_residual = q.residual;

    const std::string hash = config.Hash();
    if (config.coverage) {
      const LinearParameterization features =
          game.has_features() ? game.features() : OneHotFeatures(game);
      const CovarianceSet cov = BuildCovariances(dataset, features, config.lambda);
      result.coverage =
          BuildCoverageReport(game, suite.expert, ComputeBonuses(features, cov));
      log.Write("coverage.csv", "config_hash," + CoverageReport::CsvHeader() + "\n" +
                                    hash + "," + result.coverage->CsvRow() + "\n");
    }
    log.Write("eval.csv", MetricsCsv(hash, {result}));
    return result;
  });
}

RunResult RunSingle(const ExperimentConfig& config, std::uint64_t seed,
                    ArtifactLog& log) {
  RunResult result;
  result.seed = seed;
  try {
    StageMakeGame(config, log);
    StageGenerateData(config, seed, log);
    StageLabel(config, seed, log);
    StageFitReward(config, seed, log);
    StageFitReference(config, log);
    StageTrain(config, log);
    result = StageEvaluate(config, seed, log);
  } catch (const StageError& e) {
    result.status = "failed:" + e.stage();
    result.error = e.what();
  } catch (const std::exception& e) {
    result.status = "failed:config";
    result.error = e.what();
  }
  if (!result.ok()) spdlog::error("seed {}: {}", seed, result.error);
  return result;
}

bool PipelineOutcome::ok() const {
  return std::all_of(runs.begin(), runs.end(),
                     [](const RunResult& r) { return r.ok(); });
}

std::string MetricsCsv(const std::string& config_hash,
                       const std::vector<RunResult>& runs) {
  CsvTable table({"config_hash", "kind", "seed", "status", "mean_return",
                  "return_stderr", "mc_return", "mc_stderr", "nash_gap",
                  "expert_return", "trivial_return", "reward_mse", "train_nll",
                  "holdout_accuracy", "smoothness", "degenerate",
                  "ref_agreement", "vdn_residual"});
  auto add = [&](const std::string& kind, const std::string& seed,
                 const RunResult& r, double stderr_returns) {
    table.Row().Add(config_hash).Add(kind).Add(seed).Add(r.status)
        .Add(r.mean_return).Add(stderr_returns).Add(r.mc_return)
        .Add(r.mc_stderr).Add(r.nash_gap).Add(r.expert_return)
        .Add(r.trivial_return).Add(r.reward_mse).Add(r.train_nll)
        .Add(r.holdout_accuracy).Add(r.smoothness).Add(r.degenerate ? 1 : 0)
        .Add(r.ref_agreement).Add(r.vdn_residual);
  };
  for (const RunResult& r : runs) add("run", std::to_string(r.seed), r, 0.0);
  if (runs.size() > 1) {
    std::vector<const RunResult*> ok;
    for (const RunResult& r : runs) {
      if (r.ok()) ok.push_back(&r);
    }
    RunResult mean;
    mean.status = fmt::format("{}/{}", ok.size(), runs.size());
    const double n = static_cast<double>(ok.size());
    double sq = 0.0;
    int degenerate = 0, agreement = 0;
    for (const RunResult* r : ok) {
      mean.mean_return += r->mean_return / n;
      mean.mc_return += r->mc_return / n;
      mean.mc_stderr += r->mc_stderr / n;
      mean.nash_gap += r->nash_gap / n;
      mean.expert_return += r->expert_return / n;
      mean.trivial_return += r->trivial_return / n;
      mean.reward_mse += r->reward_mse / n;
      mean.train_nll += r->train_nll / n;
      mean.holdout_accuracy += r->holdout_accuracy / n;
      mean.smoothness += r->smoothness / n;
      mean.vdn_residual += r->vdn_residual / n;
      degenerate += r->degenerate ? 1 : 0;
      agreement += r->ref_agreement;
    }
    for (const RunResult* r : ok) sq += std::pow(r->mean_return - mean.mean_return, 2);
    const double stderr_returns = ok.size() > 1 ? std::sqrt(sq / (n - 1) / n) : 0.0;
    mean.degenerate = 2 * degenerate > static_cast<int>(ok.size());
    mean.ref_agreement = ok.empty() ? 0 : agreement / static_cast<int>(ok.size());
    add("summary", "all", mean, stderr_returns);
  }
  return table.ToString();
}

namespace {

std::vector<RunResult> ReadMetrics(const std::string& text) {
  const CsvData data = ParseCsv(text);
  std::vector<RunResult> runs;
  auto col = [&](const char* name) {
    const int c = data.Column(name);
    if (c < 0) throw ConfigError(std::string("metrics column missing: ") + name);
    return c;
  };
  for (const auto& row : data.rows) {
    if (row[col("kind")] != "run") continue;
    RunResult r;
    r.seed = std::stoull(row[col("seed")]);
    r.status = row[col("status")];
    r.mean_return = std::stod(row[col("mean_return")]);
    r.mc_return = std::stod(row[col("mc_return")]);
    r.mc_stderr = std::stod(row[col("mc_stderr")]);
    r.nash_gap = std::stod(row[col("nash_gap")]);
    r.expert_return = std::stod(row[col("expert_return")]);
    r.trivial_return = std::stod(row[col("trivial_return")]);
    r.reward_mse = std::stod(row[col("reward_mse")]);
    r.train_nll = std::stod(row[col("train_nll")]);
    r.holdout_accuracy = std::stod(row[col("holdout_accuracy")]);
    r.smoothness = std::stod(row[col("smoothness")]);
    r.degenerate = row[col("degenerate")] == "1";
    r.ref_agreement = std::stoi(row[col("ref_agreement")]);
    r.vdn_residual = std::stod(row[col("vdn_residual")]);
    runs.push_back(r);
  }
  return runs;
}

}  // namespace

PipelineOutcome RunPipeline(const ExperimentConfig& config, int workers) {
  PipelineOutcome outcome;
  outcome.config_hash = config.Hash();
  outcome.run_dir = fs::path(config.out_dir) / config.ShortHash();
  if (ManifestValid(outcome.run_dir, outcome.config_hash)) {
    outcome.cache_hit = true;
    outcome.runs = ReadMetrics(ReadFile(outcome.run_dir / "metrics.csv"));
    spdlog::info("cache hit for {}", outcome.run_dir.string());
    return outcome;
  }
  ArtifactLog log(outcome.run_dir);
  log.Write("config.json", config.CanonicalJson());
  const int n = static_cast<int>(config.seeds.size());
  std::vector<ArtifactLog> logs;
  for (std::uint64_t seed : config.seeds) {
    logs.emplace_back(outcome.run_dir / fmt::format("seed_{}", seed));
  }
  outcome.runs.resize(n);
  ParallelFor(n, workers, [&](int k) {
    outcome.runs[k] = RunSingle(config, config.seeds[k], logs[k]);
  });
  for (const ArtifactLog& l : logs) log.Merge(l);
  log.Write("metrics.csv", MetricsCsv(outcome.config_hash, outcome.runs));
  WriteFile(outcome.run_dir / "manifest.json", log.ManifestJson(outcome.config_hash));
  return outcome;
}

// ---------------------------------------------------------------------------
// Counterexample

std::string CounterexampleReport::Csv() const {
  CsvTable table({"num_pairs", "seed", "gap_m1", "gap_m2", "max_gap",
                  "output_joint", "same_output", "identical_data", "u_star_m1",
                  "u_star_m2", "u_star_reference"});
  for (const CounterexampleSeed& s : seeds) {
    std::string joint;
    for (std::size_t k = 0; k < s.output_joint.size(); ++k) {
      joint += (k ? ";" : "") + std::to_string(s.output_joint[k]);
    }
    table.Row().Add(num_pairs).Add(std::to_string(s.seed)).Add(s.gap_m1)
        .Add(s.gap_m2).Add(s.max_gap).Add(joint).Add(s.same_output ? 1 : 0)
        .Add(s.identical_data ? 1 : 0).Add(s.u_star_m1).Add(s.u_star_m2)
        .Add(s.u_star_reference);
  }
  return table.ToString() + fmt::format("# fraction_max_gap_ge_0.45,{}\n",
                                        FormatDouble(fraction_at_least));
}

namespace {

struct ViewResult {
  JointPolicy output;
  double u_star = 0.0;
};

// Runs the theory pipeline on `dataset` using `game`'s features, and reports
// U_D(pi*) of that game's equilibrium under the same covariances.
ViewResult RunView(const MarkovGame& game, const PreferenceDataset& dataset,
                   double c, double c_p) {
  const LinearParameterization& features = game.features();
  const CovarianceSet cov = BuildCovariances(dataset, features, 1.0);
  MleConfig mle;
  mle.c = c;
  const RewardEstimate estimate = FitLinearMle(dataset, features, mle);
  TheoryConfig tc;
  tc.c_p = c_p;
  const TheoryContext context(dataset, features, cov, estimate, tc);
  ViewResult view;
  view.output =
      SurrogateMinimize(context, game.shape(), game.initial_state(), tc).policy;
  view.u_star = PolicyUncertainty(game, SolveMatrixNash2x2(game), cov).total;
  return view;
}

PreferenceDataset LabelWithoutId(const TrajectoryPool& pool, const MarkovGame& game,
                                 std::uint64_t seed) {
  LabelConfig label;
  label.mode = LabelMode::kRaw;
  label.steepness = 1.0;
  label.seed = seed;
  PreferenceDataset dataset = LabelPreferences(pool, game, label);
  dataset.meta.game_id = "counterexample";
  return dataset;
}

}  // namespace

CounterexampleReport RunCounterexample(int num_pairs,
                                       const std::vector<std::uint64_t>& seeds,
                                       double c, double c_p) {
  if (num_pairs < 100) throw ConfigError("counterexample needs at least 100 pairs");
  const Counterexample ce = BuildCounterexample();
  CounterexampleReport report;
  report.num_pairs = num_pairs;
  int hits = 0;
  for (std::uint64_t seed : seeds) {
    CounterexampleSeed row;
    row.seed = seed;
    const TrajectoryPool pool =
        CollectIndependentPairs(ce.m1, ce.behavior, num_pairs, DeriveSeed(seed, kDataStream));
    const PreferenceDataset d1 = LabelWithoutId(pool, ce.m1, DeriveSeed(seed, kLabelStream));
    const PreferenceDataset d2 = LabelWithoutId(pool, ce.m2, DeriveSeed(seed, kLabelStream));
    row.identical_data = d1.ToJsonl() == d2.ToJsonl();

    const ViewResult v1 = RunView(ce.m1, d1, c, c_p);
    const ViewResult v2 = RunView(ce.m2, d2, c, c_p);
    row.same_output = v1.output == v2.output;
    row.gap_m1 = NashGap(ce.m1, v1.output).total_gap;
    row.gap_m2 = NashGap(ce.m2, v1.output).total_gap;
    row.max_gap = std::max(row.gap_m1, row.gap_m2);
    row.u_star_m1 = v1.u_star;
    row.u_star_m2 = v2.u_star;
    for (int i = 0; i < ce.m1.num_players(); ++i) {
      row.output_joint.push_back(v1.output.Greedy(0, i, ce.m1.initial_state()));
    }

    const TrajectoryPool small =
        CollectIndependentPairs(ce.m1, ce.behavior, 200, DeriveSeed(seed, kDataStream));
    const PreferenceDataset ds = LabelWithoutId(small, ce.m1, DeriveSeed(seed, kLabelStream));
    const CovarianceSet cov_small = BuildCovariances(ds, ce.m1.features(), 1.0);
    row.u_star_reference =
        PolicyUncertainty(ce.m1, SolveMatrixNash2x2(ce.m1), cov_small).total;

    if (row.max_gap >= 0.45) ++hits;
    report.seeds.push_back(std::move(row));
  }
  report.fraction_at_least =
      seeds.empty() ? 0.0 : static_cast<double>(hits) / seeds.size();
  return report;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

bool LogAxis(const std::string& axis) { return axis != "mixture"; }

}  // namespace

SweepOutcome RunSweep(const ExperimentConfig& config, const std::string& axis,
                      int workers) {
  static const std::set<std::string> kAxes = {"alpha", "beta", "mixture", "N"};
  if (!kAxes.count(axis)) throw ConfigError("unknown sweep axis " + axis);
  std::vector<ExperimentConfig> points;
  SweepOutcome sweep;
  sweep.axis = axis;
  if (axis == "mixture") {
    const std::vector<std::string> names =
        config.sweep_mixtures.empty() ? MixtureNames() : config.sweep_mixtures;
    for (const auto& name : names) {
      ExperimentConfig c = config;
      c.mixture = name;
      c.ratios.reset();
      c.coverage = true;
      points.push_back(c);
      sweep.labels.push_back(name);
    }
  } else {
    if (config.sweep_values.empty()) throw ConfigError("sweep grid is empty");
    for (double v : config.sweep_values) {
      ExperimentConfig c = config;
      if (axis == "alpha") c.reward.alpha = v;
      if (axis == "beta") c.beta = v;
      if (axis == "N") c.total_trajectories = static_cast<int>(std::lround(v));
      c.Validate();
      points.push_back(c);
      sweep.labels.push_back(FormatDouble(v));
    }
  }
  for (auto& p : points) {
    p.sweep_axis.clear();
    p.sweep_values.clear();
    p.sweep_mixtures.clear();
  }
  const std::string hash = config.Hash();
  sweep.dir = fs::path(config.out_dir) / fmt::format("sweep_{}_{}", axis, hash.substr(0, 16));
  const int num_points = static_cast<int>(points.size());
  const int num_seeds = static_cast<int>(config.seeds.size());
  sweep.results.assign(num_points, std::vector<RunResult>(num_seeds));
  std::vector<ArtifactLog> logs;
  for (int p = 0; p < num_points; ++p) {
    for (int s = 0; s < num_seeds; ++s) {
      logs.emplace_back(sweep.dir / fmt::format("point_{}", p) /
                        fmt::format("seed_{}", config.seeds[s]));
    }
  }
  ParallelFor(num_points * num_seeds, workers, [&](int k) {
    const int p = k / num_seeds;
    const int s = k % num_seeds;
    sweep.results[p][s] = RunSingle(points[p], config.seeds[s], logs[k]);
  });
  ArtifactLog log(sweep.dir);
  for (const ArtifactLog& l : logs) log.Merge(l);
  for (int p = 0; p < num_points; ++p) {
    for (const RunResult& r : sweep.results[p]) {
      if (!r.ok()) {
        sweep.failures.push_back(fmt::format("{}={} seed {}: {}", axis, sweep.labels[p],
                                             r.seed, r.error));
      }
    }
  }
  const std::string csv = SweepCsv(sweep, hash);
  log.Write(fmt::format("sweep_{}.csv", axis), csv);
  PlotSweepCsv(csv, sweep.dir, &log);
  WriteFile(sweep.dir / "manifest.json", log.ManifestJson(hash));
  return sweep;
}

std::string SweepCsv(const SweepOutcome& sweep, const std::string& config_hash) {
  CsvTable table({"config_hash", "axis", "value", "seed", "status", "return",
                  "nash_gap", "reward_mse", "nll", "smoothness",
                  "holdout_accuracy", "degenerate", "ref_agreement",
                  "u_single", "u_unilateral", "u_uniform"});
  for (std::size_t p = 0; p < sweep.results.size(); ++p) {
    for (const RunResult& r : sweep.results[p]) {
      table.Row().Add(config_hash).Add(sweep.axis).Add(sweep.labels[p])
          .Add(std::to_string(r.seed)).Add(r.status).Add(r.mean_return)
          .Add(r.nash_gap).Add(r.reward_mse).Add(r.train_nll).Add(r.smoothness)
          .Add(r.holdout_accuracy).Add(r.degenerate ? 1 : 0).Add(r.ref_agreement);
      if (r.coverage) {
        table.Add(r.coverage->single.total).Add(r.coverage->unilateral.total)
            .Add(r.coverage->uniform.total);
      } else {
        table.Add("").Add("").Add("");
      }
    }
  }
  return table.ToString();
}

std::vector<std::string> PlotSweepCsv(const std::string& csv_text,
                                      const fs::path& dir, ArtifactLog* log) {
  const CsvData data = ParseCsv(csv_text);
  const int c_axis = data.Column("axis"), c_value = data.Column("value");
  const int c_status = data.Column("status"), c_hash = data.Column("config_hash");
  if (c_axis < 0 || c_value < 0 || c_status < 0) {
    throw ConfigError("not a sweep CSV");
  }
  if (data.rows.empty()) return {};
  const std::string axis = data.rows[0][c_axis];
  const std::string hash = c_hash >= 0 ? data.rows[0][c_hash] : "";
  // Grid points in order of first appearance.
  std::vector<std::string> labels;
  for (const auto& row : data.rows) {
    if (std::find(labels.begin(), labels.end(), row[c_value]) == labels.end()) {
      labels.push_back(row[c_value]);
    }
  }
  std::vector<std::string> written;
  for (const char* metric : {"return", "nash_gap", "reward_mse", "nll", "smoothness"}) {
    const int c_metric = data.Column(metric);
    if (c_metric < 0) continue;
    PlotSeries series;
    series.name = std::string("mean ") + metric;
    for (std::size_t k = 0; k < labels.size(); ++k) {
      double total = 0.0;
      int count = 0;
      for (const auto& row : data.rows) {
        if (row[c_value] != labels[k] || row[c_status] != "ok") continue;
        total += std::stod(row[c_metric]);
        ++count;
      }
      if (count == 0) continue;
      series.x.push_back(LogAxis(axis) ? std::stod(labels[k]) : static_cast<double>(k));
      series.y.push_back(total / count);
    }
    PlotSpec spec;
    spec.title = fmt::format("{} vs {}", metric, axis);
    spec.x_label = axis == "mixture" ? "mixture (index)" : axis;
    spec.y_label = metric;
    spec.log_x = LogAxis(axis);
    std::string svg = LinePlotSvg(spec, {series});
    if (axis == "mixture") {
      std::string legend;
      for (std::size_t k = 0; k < labels.size(); ++k) {
        legend += fmt::format(" {}={}", k, labels[k]);
      }
      svg.insert(svg.find('\n') + 1, "<!-- mixtures:" + legend + " -->\n");
    }
    svg.insert(svg.find('\n') + 1, "<!-- config_hash: " + hash + " -->\n");
    const std::string name = fmt::format("plot_{}_{}.svg", axis, metric);
    if (log && fs::equivalent(dir, log->root())) {
      log->Write(name, svg);
    } else {
      WriteFile(dir / name, svg);
    }
    written.push_back(name);
  }
  return written;
}

}  // namespace marlhf
