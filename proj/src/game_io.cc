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

// Game document schema (version "marlhf.game/1"):
//   name, players, horizon, states, actions[], initial_state,
//   reward_noise ("none" | "bernoulli"),
//   transitions: [[h, s, joint_action, next_state, prob], ...],
//   rewards: flat [((h*S + s)*|A| + a)*m + i],
//   features (optional): {kind: "dense", dim, psi, mu, theta} or
//                        {kind: "one_hot"} (rebuilt from the tabular game),
//   metadata: {string: string}.

#include <nlohmann/json.hpp>

#include "marlhf/game.h"

namespace marlhf {

namespace {

using nlohmann::json;

constexpr const char* kGameSchema = "marlhf.game/1";
constexpr const char* kPolicySchema = "marlhf.policy/1";

template <typename T>
T Field(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end()) {
    throw ConfigError(std::string("missing field '") + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad field '") + key + "': " + e.what());
  }
}

json ShapeJson(const GameShape& shape) {
  return {{"players", shape.num_players()},
          {"horizon", shape.horizon()},
          {"states", shape.num_states()},
          {"actions", shape.action_counts()}};
}

GameShape ShapeFromJson(const json& doc) {
  return GameShape(Field<int>(doc, "players"), Field<int>(doc, "horizon"),
                   Field<int>(doc, "states"),
                   Field<std::vector<int>>(doc, "actions"));
}

json Parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

std::string SaveGameJson(const MarkovGame& game) {
  const GameData& data = game.data();
  json doc = ShapeJson(data.shape);
  doc["schema"] = kGameSchema;
  doc["name"] = data.name;
  doc["initial_state"] = data.initial_state;
  doc["reward_noise"] =
      data.reward_noise == RewardNoise::kBernoulli ? "bernoulli" : "none";
  json transitions = json::array();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  for (int h = 0; h < game.horizon(); ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        for (const Transition& t : game.Next(h, s, a)) {
          transitions.push_back(json::array({h, s, a, t.next_state, t.prob}));
        }
      }
    }
  }
  doc["transitions"] = std::move(transitions);
  doc["rewards"] = data.reward_mean;
  if (data.features) {
    const LinearParameterization& f = *data.features;
    if (f.kind() == LinearParameterization::Kind::kOneHot) {
      doc["features"] = {{"kind", "one_hot"}};
    } else {
      doc["features"] = {{"kind", "dense"},
                         {"dim", f.dim()},
                         {"psi", f.psi_dense()},
                         {"mu", f.mu()},
                         {"theta", f.theta()}};
    }
  }
  doc["metadata"] = data.metadata;
  return doc.dump(1);
}

MarkovGame LoadGameJson(const std::string& text) {
  const json doc = Parse(text);
  if (Field<std::string>(doc, "schema") != kGameSchema) {
    throw ConfigError("unsupported game schema version");
  }
  GameData data;
  data.shape = ShapeFromJson(doc);
  data.name = Field<std::string>(doc, "name");
  data.initial_state = Field<int>(doc, "initial_state");
  const std::string noise = Field<std::string>(doc, "reward_noise");
  if (noise == "bernoulli") {
    data.reward_noise = RewardNoise::kBernoulli;
  } else if (noise != "none") {
    throw ConfigError("unknown reward_noise '" + noise + "'");
  }
  const int H = data.shape.horizon();
  const int S = data.shape.num_states();
  const int A = data.shape.num_joint_actions();
  const std::size_t rows = static_cast<std::size_t>(H) * S * A;
  std::vector<std::vector<Transition>> by_row(rows);
  for (const json& t : Field<json>(doc, "transitions")) {
    if (!t.is_array() || t.size() != 5) {
      throw ConfigError("transition entries must be [h, s, a, next, prob]");
    }
    const int h = t[0].get<int>();
    const int s = t[1].get<int>();
    const int a = t[2].get<int>();
    if (h < 0 || h >= H || s < 0 || s >= S || a < 0 || a >= A) {
      throw ConfigError("transition index out of range");
    }
    by_row[(static_cast<std::size_t>(h) * S + s) * A + a].push_back(
        {t[3].get<int>(), t[4].get<double>()});
  }
  for (const auto& row : by_row) data.AppendRow(std::span<const Transition>(row));
  data.reward_mean = Field<std::vector<double>>(doc, "rewards");
  if (doc.contains("metadata")) {
    data.metadata = Field<std::map<std::string, std::string>>(doc, "metadata");
  }
  if (doc.contains("features")) {
    const json& f = doc["features"];
    const std::string kind = Field<std::string>(f, "kind");
    if (kind == "one_hot") {
      MarkovGame tabular(data);
      data.features = OneHotFeatures(tabular);
    } else if (kind == "dense") {
      data.features = LinearParameterization::Dense(
          data.shape, Field<int>(f, "dim"), Field<std::vector<double>>(f, "psi"),
          Field<std::vector<double>>(f, "mu"),
          Field<std::vector<double>>(f, "theta"));
    } else {
      throw ConfigError("unknown feature kind '" + kind + "'");
    }
  }
  return MarkovGame(std::move(data));
}

std::string SavePolicyJson(const JointPolicy& policy) {
  const GameShape& shape = policy.shape();
  json doc = ShapeJson(shape);
  doc["schema"] = kPolicySchema;
  json tables = json::array();
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < shape.num_players(); ++i) {
      std::vector<double> table;
      for (int s = 0; s < shape.num_states(); ++s) {
        auto row = policy.Row(h, i, s);
        table.insert(table.end(), row.begin(), row.end());
      }
      tables.push_back(std::move(table));
    }
  }
  doc["tables"] = std::move(tables);
  return doc.dump();
}

JointPolicy LoadPolicyJson(const std::string& text) {
  const json doc = Parse(text);
  if (Field<std::string>(doc, "schema") != kPolicySchema) {
    throw ConfigError("unsupported policy schema version");
  }
  const GameShape shape = ShapeFromJson(doc);
  JointPolicy policy(shape);
  const auto tables = Field<std::vector<std::vector<double>>>(doc, "tables");
  const int m = shape.num_players();
  if (tables.size() != static_cast<std::size_t>(shape.horizon()) * m) {
    throw ConfigError("policy table count does not match the shape");
  }
  for (int h = 0; h < shape.horizon(); ++h) {
    for (int i = 0; i < m; ++i) {
      const auto& table = tables[h * m + i];
      const int n = shape.num_actions(i);
      if (table.size() != static_cast<std::size_t>(shape.num_states()) * n) {
        throw ConfigError("policy table has the wrong size");
      }
      for (int s = 0; s < shape.num_states(); ++s) {
        auto row = policy.MutableRow(h, i, s);
        std::copy_n(table.begin() + static_cast<std::size_t>(s) * n, n,
                    row.begin());
      }
    }
  }
  policy.Validate();
  return policy;
}

}  // namespace marlhf
