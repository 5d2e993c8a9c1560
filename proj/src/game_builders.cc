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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <string>

#include <fmt/format.h>

#include "marlhf/game.h"

namespace marlhf {

namespace {

// u(a, b) for player b, indexed by joint action (a_j, b_k) -> 2j + k.
constexpr std::array<double, 4> kCounterexampleM1 = {0.5, 0.0, 1.0, 0.5};
constexpr std::array<double, 4> kCounterexampleM2 = {0.5, 1.0, 0.0, 0.5};

MarkovGame CounterexampleGame(const std::string& name,
                              const std::array<double, 4>& u) {
  GameShape shape(2, 1, 1, {2, 2});
  GameData data;
  data.name = name;
  data.shape = shape;
  for (int a = 0; a < 4; ++a) {
    const double row[1] = {1.0};
    data.AppendRow(std::span<const double>(row, 1));
    data.reward_mean.push_back(1.0 - u[a]);
    data.reward_mean.push_back(u[a]);
  }
  std::vector<double> psi(16, 0.0);
  for (int a = 0; a < 4; ++a) psi[a * 4 + a] = 1.0;
  std::vector<double> mu(4, 1.0);
  std::vector<double> theta(8);
  for (int a = 0; a < 4; ++a) {
    theta[a] = 1.0 - u[a];
    theta[4 + a] = u[a];
  }
  data.features = LinearParameterization::Dense(shape, 4, std::move(psi),
                                                std::move(mu), std::move(theta));
  data.metadata["builder"] = "counterexample";
  return MarkovGame(std::move(data));
}

// Flat Dirichlet(1) sample.
std::vector<double> SimplexSample(int n, Rng& rng) {
  std::vector<double> out(n);
  double total = 0.0;
  for (double& v : out) {
    v = -std::log(1.0 - Uniform01(rng));
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

Counterexample BuildCounterexample() {
  MarkovGame m1 = CounterexampleGame("counterexample-m1", kCounterexampleM1);
  MarkovGame m2 = CounterexampleGame("counterexample-m2", kCounterexampleM2);
  PolicyMixture behavior;
  behavior.weights = {0.5, 0.5};
  behavior.components = {JointPolicy::Constant(m1.shape(), 0),
                         JointPolicy::Constant(m1.shape(), 3)};
  return {std::move(m1), std::move(m2), std::move(behavior)};
}

// Construction. With anchor value c, every feature is psi(s,a) = [c, r u(s,a)]
// where r = sqrt(1 - c^2) and u(s,a) >= 0 with sum(u) <= 1. Each latent
// coordinate k carries its own next-state distribution q_{h,k}, and
//   mu_h(s') = [p(s') / c, (q_{h,k}(s') - p(s')) / r],  p uniform,
// so <psi(s,a), mu_h(s')> = (1 - sum_k u_k) p(s') + sum_k u_k q_{h,k}(s'):
// a mixture of distributions, hence always a valid transition row. The anchor coordinate
// gets zero reward weight, theta_{h,i} = [0, U[0,1]^{d-1}]. This keeps the
// reward parameter identifiable from trajectory comparisons: every linear
// model has a direction v with <psi(s,a), v> = 1 everywhere (here
// v = e_1 / c), and shifting theta_h along it changes no preference.
MarkovGame BuildRandomLinearGame(const RandomLinearGameParams& params) {
  if (params.dim < 1) throw ConfigError("feature dimension must be >= 1");
  GameShape shape(params.num_players, params.horizon, params.num_states,
                  params.action_counts);
  const int H = shape.horizon();
  const int S = shape.num_states();
  const int A = shape.num_joint_actions();
  const int m = shape.num_players();
  const int d = params.dim;
  Rng rng(params.seed);

  const double c = d == 1 ? 1.0 : 1.0 / std::sqrt(2.0);
  const double r = std::sqrt(1.0 - c * c);
  std::vector<double> psi(static_cast<std::size_t>(S) * A * d, 0.0);
  for (int sa = 0; sa < S * A; ++sa) {
    psi[static_cast<std::size_t>(sa) * d] = c;
    if (d == 1) continue;
    // A slack coordinate is drawn and dropped, so sum(u) < 1 varies across
    // (s, a). With u on the face itself, <psi, (0, 1, ..., 1)> would be
    // constant and a reward offset along it could never be identified from
    // trajectory comparisons.
    const std::vector<double> u = SimplexSample(d, rng);
    for (int k = 0; k < d - 1; ++k) {
      psi[static_cast<std::size_t>(sa) * d + 1 + k] = r * u[k];
    }
  }

  const double mu_bound = std::sqrt(static_cast<double>(d));
  std::vector<double> mu(static_cast<std::size_t>(H) * S * d, 0.0);
  for (int h = 0; h < H; ++h) {
    bool accepted = false;
    for (int attempt = 0; attempt < 1000 && !accepted; ++attempt) {
      std::vector<double> p = d == 1 ? SimplexSample(S, rng)
                                     : std::vector<double>(S, 1.0 / S);
      std::vector<std::vector<double>> q;
      for (int k = 0; k + 1 < d; ++k) q.push_back(SimplexSample(S, rng));
      accepted = true;
      for (int sp = 0; sp < S; ++sp) {
        double* row = mu.data() + (static_cast<std::size_t>(h) * S + sp) * d;
        row[0] = p[sp] / c;
        double norm_sq = row[0] * row[0];
        for (int k = 0; k + 1 < d; ++k) {
          row[1 + k] = (q[k][sp] - p[sp]) / r;
          norm_sq += row[1 + k] * row[1 + k];
        }
        if (std::sqrt(norm_sq) > mu_bound) accepted = false;
      }
    }
    if (!accepted) {
      throw ConfigError(fmt::format(
          "could not build a valid transition for step {} in 1000 attempts",
          h));
    }
  }

  std::vector<double> theta(static_cast<std::size_t>(H) * m * d, 0.0);
  for (int hi = 0; hi < H * m; ++hi) {
    double* row = theta.data() + static_cast<std::size_t>(hi) * d;
    if (d == 1) {
      row[0] = Uniform01(rng);
    } else {
      for (int k = 1; k < d; ++k) row[k] = Uniform01(rng);
    }
  }

  GameData data;
  data.name = fmt::format("random-linear-{}", params.seed);
  data.shape = shape;
  std::vector<double> dense_row(S);
  for (int h = 0; h < H; ++h) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        const std::size_t sa = static_cast<std::size_t>(s) * A + a;
        double total = 0.0;
        for (int sp = 0; sp < S; ++sp) {
          const double* mrow =
              mu.data() + (static_cast<std::size_t>(h) * S + sp) * d;
          double v = 0.0;
          for (int k = 0; k < d; ++k) v += psi[sa * d + k] * mrow[k];
          // Exact value is a convex combination; clamp representation noise.
          dense_row[sp] = std::max(0.0, v);
          total += dense_row[sp];
        }
        for (double& v : dense_row) v /= total;
        data.AppendRow(std::span<const double>(dense_row));
        for (int i = 0; i < m; ++i) {
          const double* trow =
              theta.data() + (static_cast<std::size_t>(h) * m + i) * d;
          double v = 0.0;
          for (int k = 0; k < d; ++k) v += psi[sa * d + k] * trow[k];
          data.reward_mean.push_back(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  data.features = LinearParameterization::Dense(shape, d, std::move(psi),
                                                std::move(mu), std::move(theta));
  data.metadata["builder"] = "random_linear";
  data.metadata["seed"] = std::to_string(params.seed);
  data.metadata["anchor"] = fmt::format("{:.17g}", c);
  return MarkovGame(std::move(data));
}

// Grid layout: cell = row * g + col. State index is mixed-radix over agent
// cells with agent 0 most significant. Actions: stay, up, down, left, right,
// clipped at the walls. Rewards are computed on post-move positions:
//   raw = -sum_l min_j dist(agent_j, landmark_l) - #colliding pairs
//   r   = 1 + raw / worst,   worst = n * 2(g-1) + n(n-1)/2
// identical for all agents (cooperative).
MarkovGame BuildGridSpread(const GridSpreadParams& params) {
  const int n = params.num_agents;
  const int g = params.grid_size;
  if (n < 2) throw ConfigError("grid spread needs at least two agents");
  if (g < 2) throw ConfigError("grid size must be at least 2");
  if (params.horizon < 1) throw ConfigError("horizon must be positive");
  const int cells = g * g;
  double states_real = std::pow(static_cast<double>(cells), n);
  if (states_real > 1e5) {
    throw SizingError(fmt::format(
        "grid spread state space {} exceeds the cap of 100000", states_real));
  }
  const int S = static_cast<int>(states_real);
  constexpr int kMoves = 5;
  GameShape shape(n, params.horizon, S, std::vector<int>(n, kMoves));
  const int A = shape.num_joint_actions();

  std::vector<int> landmarks(n);
  for (int k = 0; k < n; ++k) {
    landmarks[k] = static_cast<int>(
        std::lround(static_cast<double>(k) * (cells - 1) / (n - 1)));
  }
  const double worst = n * 2.0 * (g - 1) + n * (n - 1) / 2.0;

  auto decode = [&](int state, std::vector<int>& pos) {
    for (int i = n - 1; i >= 0; --i) {
      pos[i] = state % cells;
      state /= cells;
    }
  };
  auto encode = [&](const std::vector<int>& pos) {
    int state = 0;
    for (int i = 0; i < n; ++i) state = state * cells + pos[i];
    return state;
  };
  auto move = [&](int cell, int action) {
    int row = cell / g;
    int col = cell % g;
    switch (action) {
      case 1: row = std::max(0, row - 1); break;
      case 2: row = std::min(g - 1, row + 1); break;
      case 3: col = std::max(0, col - 1); break;
      case 4: col = std::min(g - 1, col + 1); break;
      default: break;
    }
    return row * g + col;
  };
  auto raw_reward = [&](const std::vector<int>& pos) {
    double raw = 0.0;
    for (int l : landmarks) {
      int best = 2 * g;
      for (int p : pos) {
        best = std::min(best, std::abs(p / g - l / g) + std::abs(p % g - l % g));
      }
      raw -= best;
    }
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) raw -= pos[i] == pos[j] ? 1.0 : 0.0;
    }
    return raw;
  };

  // Per-(s, a) next state and reward are step independent.
  std::vector<int> next_state(static_cast<std::size_t>(S) * A);
  std::vector<double> reward(static_cast<std::size_t>(S) * A);
  std::vector<int> pos(n), moved(n), acts(n);
  for (int s = 0; s < S; ++s) {
    decode(s, pos);
    for (int a = 0; a < A; ++a) {
      shape.Decode(a, acts);
      for (int i = 0; i < n; ++i) moved[i] = move(pos[i], acts[i]);
      const std::size_t sa = static_cast<std::size_t>(s) * A + a;
      next_state[sa] = encode(moved);
      reward[sa] = std::clamp(1.0 + raw_reward(moved) / worst, 0.0, 1.0);
    }
  }

  GameData data;
  data.name = fmt::format("grid-spread-n{}-g{}-h{}", n, g, params.horizon);
  data.shape = shape;
  std::vector<int> start(n);
  for (int i = 0; i < n; ++i) {
    start[i] = (g - 1 - (i / g) % g) * g + i % g;
  }
  data.initial_state = encode(start);
  data.row_offsets.reserve(static_cast<std::size_t>(params.horizon) * S * A + 1);
  data.transitions.reserve(static_cast<std::size_t>(params.horizon) * S * A);
  data.reward_mean.reserve(static_cast<std::size_t>(params.horizon) * S * A * n);
  for (int h = 0; h < params.horizon; ++h) {
    for (std::size_t sa = 0; sa < next_state.size(); ++sa) {
      const Transition t{next_state[sa], 1.0};
      data.AppendRow(std::span<const Transition>(&t, 1));
      for (int i = 0; i < n; ++i) data.reward_mean.push_back(reward[sa]);
    }
  }
  std::string landmark_list;
  for (int k = 0; k < n; ++k) {
    landmark_list += (k ? "," : "") + std::to_string(landmarks[k]);
  }
  data.metadata["builder"] = "grid_spread";
  data.metadata["grid.size"] = std::to_string(g);
  data.metadata["grid.agents"] = std::to_string(n);
  data.metadata["grid.landmarks"] = landmark_list;
  data.metadata["reward.offset"] = "1";
  data.metadata["reward.scale"] = fmt::format("{:.17g}", 1.0 / worst);

  const double feature_doubles = static_cast<double>(S) * A * S * params.horizon;
  if (params.feature_budget > 0 && feature_doubles <= params.feature_budget) {
    MarkovGame tabular(data);
    data.features = OneHotFeatures(tabular);
  }
  return MarkovGame(std::move(data));
}

std::vector<int> GridCells(const MarkovGame& game, int state) {
  const auto& meta = game.metadata();
  auto size_it = meta.find("grid.size");
  auto agents_it = meta.find("grid.agents");
  if (size_it == meta.end() || agents_it == meta.end()) {
    throw ConfigError("game is not a grid game");
  }
  const int g = std::stoi(size_it->second);
  const int n = std::stoi(agents_it->second);
  const int cells = g * g;
  std::vector<int> pos(n);
  for (int i = n - 1; i >= 0; --i) {
    pos[i] = state % cells;
    state /= cells;
  }
  return pos;
}

}  // namespace marlhf
