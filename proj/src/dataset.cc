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

#include "marlhf/dataset.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "marlhf/equilibrium.h"

namespace marlhf {

namespace {

using nlohmann::json;

constexpr const char* kDatasetSchema = "marlhf.dataset/1";

// Stream ids used to carve substreams out of the master seed.
constexpr std::uint64_t kPairStream = 0xFFFF'FFFF'0000'0001ULL;
constexpr std::uint64_t kComponentStream = 0xFFFF'FFFF'0000'0002ULL;

}  // namespace

JointPolicy SoftenedPolicy(const MarkovGame& game, const JointPolicy& base,
                           double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  const ValueTable v = ExactValues(game, base);
  JointPolicy out(game.shape());
  std::vector<double> others(A);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int i = 0; i < m; ++i) {
        const int n = game.num_actions(i);
        std::vector<double> q(n, 0.0);
        base.OthersDistribution(h, s, i, others);
        for (int a = 0; a < A; ++a) {
          if (others[a] == 0.0) continue;
          double target = game.Reward(h, s, a, i);
          for (const Transition& t : game.Next(h, s, a)) {
            target += t.prob * v.At(h + 1, t.next_state, i);
          }
          q[game.shape().ActionOf(a, i)] += others[a] * target;
        }
        const double top = *std::max_element(q.begin(), q.end());
        auto row = out.MutableRow(h, i, s);
        double total = 0.0;
        for (int b = 0; b < n; ++b) {
          row[b] = std::exp((q[b] - top) / temperature);
          total += row[b];
        }
        for (int b = 0; b < n; ++b) row[b] /= total;
      }
    }
  }
  return out;
}

BehaviorSuite DeriveBehaviorSuite(const MarkovGame& game,
                                  std::span<const double> temperatures) {
  if (temperatures.empty()) throw ConfigError("need at least one temperature");
  BehaviorSuite suite;
  suite.expert = IsConstantSum2x2(game) ? SolveMatrixNash2x2(game)
                                        : TeamOptimalPolicy(game).policy;
  suite.trivial = JointPolicy::Uniform(game.shape());
  suite.rookie = SoftenedPolicy(game, suite.expert, temperatures[0]);
  for (int i = 0; i < game.num_players(); ++i) {
    const double t = temperatures[i % temperatures.size()];
    const JointPolicy soft = t == temperatures[0]
                                 ? suite.rookie
                                 : SoftenedPolicy(game, suite.expert, t);
    suite.unilateral.push_back(suite.expert.WithPlayer(i, soft));
  }
  return suite;
}

MixtureRatios MixtureByName(const std::string& name) {
  if (name == "Diversified") return {1, 1, 1, 1};
  if (name == "Mix-Unilateral") return {2, 1, 0, 1};
  if (name == "Mix-Expert") return {3, 0, 0, 1};
  if (name == "Pure-Expert") return {4, 0, 0, 0};
  throw ConfigError("unknown mixture '" + name + "'");
}

const std::vector<std::string>& MixtureNames() {
  static const std::vector<std::string> names = {
      "Diversified", "Mix-Unilateral", "Mix-Expert", "Pure-Expert"};
  return names;
}

std::array<int, 4> ApportionCounts(const MixtureRatios& ratios, int total) {
  double sum = 0.0;
  int nonzero = 0;
  for (double r : ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw ConfigError("mixture ratios must be finite and nonnegative");
    }
    sum += r;
    nonzero += r > 0.0 ? 1 : 0;
  }
  if (nonzero == 0) throw ConfigError("mixture ratios are all zero");
  if (total < nonzero) {
    throw SizingError(fmt::format(
        "{} trajectories cannot cover {} mixture components", total, nonzero));
  }
  std::array<int, 4> counts{};
  std::array<double, 4> remainder{};
  int assigned = 0;
  for (int k = 0; k < 4; ++k) {
    const double exact = total * ratios[k] / sum;
    counts[k] = static_cast<int>(std::floor(exact));
    remainder[k] = exact - counts[k];
    assigned += counts[k];
  }
  std::array<int, 4> order = {0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return remainder[x] > remainder[y];
  });
  for (int k = 0; assigned < total; k = (k + 1) % 4) {
    if (ratios[order[k]] > 0.0) {
      ++counts[order[k]];
      ++assigned;
    }
  }
  return counts;
}

TrajectoryPool CollectDataset(const MarkovGame& game, const BehaviorSuite& suite,
                              const MixtureRatios& ratios,
                              int total_trajectories, int pairs_multiplier,
                              std::uint64_t seed) {
  if (pairs_multiplier < 1) throw ConfigError("pairs multiplier must be >= 1");
  const std::array<int, 4> counts = ApportionCounts(ratios, total_trajectories);
  TrajectoryPool pool;
  pool.seed = seed;
  pool.trajectories.reserve(total_trajectories);
  std::uint64_t index = 0;
  for (int k = 0; k < 4; ++k) {
    pool.component_counts.emplace_back(kComponentNames[k], counts[k]);
    for (int j = 0; j < counts[k]; ++j, ++index) {
      const JointPolicy* policy = nullptr;
      switch (k) {
        case 0: policy = &suite.expert; break;
        case 1: policy = &suite.unilateral[j % suite.unilateral.size()]; break;
        case 2: policy = &suite.rookie; break;
        default: policy = &suite.trivial; break;
      }
      Rng rng(DeriveSeed(seed, index));
      pool.trajectories.push_back(Rollout(game, *policy, rng));
      pool.tags.push_back(k == 1 ? fmt::format("unilateral_{}",
                                               j % suite.unilateral.size())
                                 : std::string(kComponentNames[k]));
    }
  }
  const std::int64_t num_pairs =
      static_cast<std::int64_t>(total_trajectories) * pairs_multiplier;
  Rng pair_rng(DeriveSeed(seed, kPairStream));
  const std::uint64_t n = pool.trajectories.size();
  pool.pairs.reserve(num_pairs);
  for (std::int64_t p = 0; p < num_pairs; ++p) {
    const int x = static_cast<int>(pair_rng() % n);
    const int y = static_cast<int>(pair_rng() % n);
    pool.pairs.emplace_back(x, y);
  }
  return pool;
}

TrajectoryPool CollectIndependentPairs(const MarkovGame& game,
                                       const PolicyMixture& behavior,
                                       int num_pairs, std::uint64_t seed) {
  if (num_pairs < 0) throw SizingError("negative pair count");
  TrajectoryPool pool;
  pool.seed = seed;
  pool.mixture = "behavior";
  pool.trajectories.reserve(2 * static_cast<std::size_t>(num_pairs));
  Rng component_rng(DeriveSeed(seed, kComponentStream));
  std::vector<int> per_component(behavior.components.size(), 0);
  for (int k = 0; k < 2 * num_pairs; ++k) {
    const int c = SampleIndex(behavior.weights, component_rng);
    ++per_component[c];
    Rng rng(DeriveSeed(seed, k));
    pool.trajectories.push_back(Rollout(game, behavior.components[c], rng));
    pool.tags.push_back(fmt::format("component_{}", c));
  }
  for (int p = 0; p < num_pairs; ++p) pool.pairs.emplace_back(2 * p, 2 * p + 1);
  for (std::size_t c = 0; c < per_component.size(); ++c) {
    pool.component_counts.emplace_back(fmt::format("component_{}", c),
                                       per_component[c]);
  }
  return pool;
}

std::string LabelModeName(LabelMode mode) {
  return mode == LabelMode::kRaw ? "raw" : "standardized";
}

LabelMode ParseLabelMode(const std::string& name) {
  if (name == "raw" || name == "raw-return") return LabelMode::kRaw;
  if (name == "standardized" || name == "standardized-return") {
    return LabelMode::kStandardized;
  }
  throw ConfigError("unknown label mode '" + name + "'");
}

double PreferenceProbability(double return_a, double return_b,
                             double steepness) {
  return Sigmoid(steepness * (return_a - return_b));
}

std::vector<double> SequenceReturns(const MarkovGame& game,
                                    const StepSequence& seq) {
  std::vector<double> out(game.num_players(), 0.0);
  for (int h = 0; h < game.horizon(); ++h) {
    auto r = game.Rewards(h, seq.states[h], seq.joint_actions[h]);
    for (int i = 0; i < game.num_players(); ++i) out[i] += r[i];
  }
  return out;
}

StepSequence ToSequence(const Trajectory& traj) {
  return {traj.states, traj.joint_actions};
}

PreferenceDataset LabelPreferences(const TrajectoryPool& pool,
                                   const MarkovGame& oracle,
                                   const LabelConfig& config) {
  if (!(config.steepness > 0.0)) throw ConfigError("steepness must be positive");
  const int m = oracle.num_players();
  const std::size_t n = pool.trajectories.size();
  PreferenceDataset dataset;
  DatasetMeta& meta = dataset.meta;
  meta.game_id = oracle.name();
  meta.mixture = pool.mixture;
  meta.steepness = config.steepness;
  meta.seed = config.seed;
  meta.num_players = m;
  meta.horizon = oracle.horizon();
  meta.total_trajectories = static_cast<int>(n);
  meta.component_counts = pool.component_counts;

  std::vector<std::vector<double>> z(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = SequenceReturns(oracle, ToSequence(pool.trajectories[k]));
  }
  LabelMode mode = config.mode;
  if (mode == LabelMode::kStandardized && n > 0) {
    std::vector<double> mean(m, 0.0), var(m, 0.0);
    for (const auto& r : z) {
      for (int i = 0; i < m; ++i) mean[i] += r[i] / n;
    }
    for (const auto& r : z) {
      for (int i = 0; i < m; ++i) var[i] += (r[i] - mean[i]) * (r[i] - mean[i]) / n;
    }
    bool degenerate = false;
    for (int i = 0; i < m; ++i) degenerate |= !(var[i] > 1e-24);
    if (degenerate) {
      const std::string warning =
          "zero return variance over the pool; labeled with raw returns";
      spdlog::warn("{}", warning);
      meta.warnings.push_back(warning);
      mode = LabelMode::kRaw;
    } else {
      for (auto& r : z) {
        for (int i = 0; i < m; ++i) r[i] = (r[i] - mean[i]) / std::sqrt(var[i]);
      }
    }
  }
  meta.label_mode = LabelModeName(mode);

  dataset.pairs.resize(pool.pairs.size());
  for (std::size_t p = 0; p < pool.pairs.size(); ++p) {
    const auto [x, y] = pool.pairs[p];
    Rng rng(DeriveSeed(config.seed, p));
    PreferencePair& pair = dataset.pairs[p];
    pair.tau_a = ToSequence(pool.trajectories[x]);
    pair.tau_b = ToSequence(pool.trajectories[y]);
    pair.source_a = pool.tags[x];
    pair.source_b = pool.tags[y];
    pair.labels.resize(m);
    for (int i = 0; i < m; ++i) {
      const double prob = PreferenceProbability(z[x][i], z[y][i], config.steepness);
      pair.labels[i] = Uniform01(rng) < prob ? 1 : -1;
    }
  }
  return dataset;
}

std::string PreferenceDataset::ToJsonl() const {
  json header;
  header["schema"] = kDatasetSchema;
  header["game_id"] = meta.game_id;
  header["mixture"] = meta.mixture;
  header["steepness"] = meta.steepness;
  header["label_mode"] = meta.label_mode;
  header["seed"] = meta.seed;
  header["players"] = meta.num_players;
  header["horizon"] = meta.horizon;
  header["total_trajectories"] = meta.total_trajectories;
  json counts = json::array();
  for (const auto& [name, count] : meta.component_counts) {
    counts.push_back(json::array({name, count}));
  }
  header["component_counts"] = std::move(counts);
  header["warnings"] = meta.warnings;
  header["pairs"] = pairs.size();
  std::string out = header.dump() + "\n";
  for (const PreferencePair& pair : pairs) {
    json rec;
    rec["a"] = {{"s", pair.tau_a.states}, {"u", pair.tau_a.joint_actions}};
    rec["b"] = {{"s", pair.tau_b.states}, {"u", pair.tau_b.joint_actions}};
    rec["y"] = pair.labels;
    rec["tags"] = json::array({pair.source_a, pair.source_b});
    out += rec.dump();
    out += '\n';
  }
  return out;
}

PreferenceDataset PreferenceDataset::FromJsonl(const std::string& text) {
  PreferenceDataset dataset;
  std::size_t start = 0;
  bool have_header = false;
  try {
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      if (end > start) {
        const json rec = json::parse(text.begin() + start, text.begin() + end);
        if (!have_header) {
          if (rec.at("schema").get<std::string>() != kDatasetSchema) {
            throw ConfigError("unsupported dataset schema version");
          }
          DatasetMeta& meta = dataset.meta;
          meta.game_id = rec.at("game_id").get<std::string>();
          meta.mixture = rec.at("mixture").get<std::string>();
          meta.steepness = rec.at("steepness").get<double>();
          meta.label_mode = rec.at("label_mode").get<std::string>();
          meta.seed = rec.at("seed").get<std::uint64_t>();
          meta.num_players = rec.at("players").get<int>();
          meta.horizon = rec.at("horizon").get<int>();
          meta.total_trajectories = rec.at("total_trajectories").get<int>();
          for (const json& c : rec.at("component_counts")) {
            meta.component_counts.emplace_back(c.at(0).get<std::string>(),
                                               c.at(1).get<int>());
          }
          meta.warnings = rec.at("warnings").get<std::vector<std::string>>();
          have_header = true;
        } else {
          PreferencePair pair;
          pair.tau_a.states = rec.at("a").at("s").get<std::vector<int>>();
          pair.tau_a.joint_actions = rec.at("a").at("u").get<std::vector<int>>();
          pair.tau_b.states = rec.at("b").at("s").get<std::vector<int>>();
          pair.tau_b.joint_actions = rec.at("b").at("u").get<std::vector<int>>();
          pair.labels = rec.at("y").get<std::vector<int>>();
          pair.source_a = rec.at("tags").at(0).get<std::string>();
          pair.source_b = rec.at("tags").at(1).get<std::string>();
          dataset.pairs.push_back(std::move(pair));
        }
      }
      start = end + 1;
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed dataset record: ") + e.what());
  }
  if (!have_header) throw ConfigError("dataset has no header record");
  return dataset;
}

}  // namespace marlhf
