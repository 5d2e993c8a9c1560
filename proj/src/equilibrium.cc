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

#include "marlhf/equilibrium.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace marlhf {

namespace {

// Margin below which two action values count as tied.
constexpr double kTieTolerance = 1e-12;

}  // namespace

BestResponse BestResponseValue(const MarkovGame& game, const JointPolicy& policy,
                               int player) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int n = game.num_actions(player);
  const int m = game.num_players();
  std::vector<double> v_next(S, 0.0), v(S, 0.0);
  std::vector<double> others(A), q(n);
  std::vector<int> choice(static_cast<std::size_t>(H) * m * S, 0);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      policy.OthersDistribution(h, s, player, others);
      std::fill(q.begin(), q.end(), 0.0);
      for (int a = 0; a < A; ++a) {
        if (others[a] == 0.0) continue;
        double target = game.Reward(h, s, a, player);
        for (const Transition& t : game.Next(h, s, a)) {
          target += t.prob * v_next[t.next_state];
        }
        q[game.shape().ActionOf(a, player)] += others[a] * target;
      }
      int best = 0;
      for (int b = 1; b < n; ++b) {
        if (q[b] > q[best] + kTieTolerance) best = b;
      }
      v[s] = q[best];
      choice[(static_cast<std::size_t>(h) * m + player) * S + s] = best;
    }
    std::swap(v, v_next);
  }
  BestResponse out;
  out.value = v_next[game.initial_state()];
  out.policy = policy.WithPlayer(
      player, JointPolicy::Deterministic(game.shape(), choice));
  return out;
}

NashGapReport NashGap(const MarkovGame& game, const JointPolicy& policy) {
  const int m = game.num_players();
  NashGapReport report;
  report.policy_value = InitialValues(game, policy);
  for (int i = 0; i < m; ++i) {
    const double br = BestResponseValue(game, policy, i).value;
    const double raw = br - report.policy_value[i];
    report.best_response.push_back(br);
    report.raw_gap.push_back(raw);
    report.gap.push_back(std::max(0.0, raw));
    report.total_gap += report.gap.back();
  }
  return report;
}

std::string NashGapReport::CsvHeader() const {
  std::string out;
  for (std::size_t i = 0; i < gap.size(); ++i) {
    out += fmt::format("br_{0},value_{0},gap_{0},", i);
  }
  return out + "total_gap";
}

std::string NashGapReport::CsvRow() const {
  std::string out;
  for (std::size_t i = 0; i < gap.size(); ++i) {
    out += fmt::format("{:.17g},{:.17g},{:.17g},", best_response[i],
                       policy_value[i], gap[i]);
  }
  return out + fmt::format("{:.17g}", total_gap);
}

bool IsConstantSum2x2(const MarkovGame& game, double tol) {
  if (game.horizon() != 1 || game.num_players() != 2 ||
      game.num_actions(0) != 2 || game.num_actions(1) != 2) {
    return false;
  }
  const int s = game.initial_state();
  const double total = game.Reward(0, s, 0, 0) + game.Reward(0, s, 0, 1);
  for (int a = 1; a < 4; ++a) {
    if (std::abs(game.Reward(0, s, a, 0) + game.Reward(0, s, a, 1) - total) >
        tol) {
      return false;
    }
  }
  return true;
}

JointPolicy SolveMatrixNash2x2(const MarkovGame& game) {
  if (!IsConstantSum2x2(game)) {
    throw ConfigError(
        "2x2 solver requires a one-step, two-player, 2x2 constant-sum game");
  }
  const int s = game.initial_state();
  // Payoffs indexed [row action][column action].
  double pa[2][2], pb[2][2];
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      pa[x][y] = game.Reward(0, s, 2 * x + y, 0);
      pb[x][y] = game.Reward(0, s, 2 * x + y, 1);
    }
  }
  for (int x = 0; x < 2; ++x) {
    for (int y = 0; y < 2; ++y) {
      const bool row_ok = pa[x][y] + kTieTolerance >= pa[1 - x][y];
      const bool col_ok = pb[x][y] + kTieTolerance >= pb[x][1 - y];
      if (row_ok && col_ok) return JointPolicy::Constant(game.shape(), 2 * x + y);
    }
  }
  // No pure equilibrium: each player mixes to make the other indifferent.
  const double p = (pb[1][1] - pb[1][0]) /
                   (pb[0][0] - pb[1][0] - pb[0][1] + pb[1][1]);
  const double q = (pa[1][1] - pa[0][1]) /
                   (pa[0][0] - pa[0][1] - pa[1][0] + pa[1][1]);
  JointPolicy out(game.shape());
  for (int st = 0; st < game.num_states(); ++st) {
    auto row = out.MutableRow(0, 0, st);
    row[0] = p;
    row[1] = 1.0 - p;
    auto col = out.MutableRow(0, 1, st);
    col[0] = q;
    col[1] = 1.0 - q;
  }
  out.Validate();
  return out;
}

TeamSolution TeamOptimalPolicy(const MarkovGame& game) {
  const int H = game.horizon();
  const int S = game.num_states();
  const int A = game.num_joint_actions();
  const int m = game.num_players();
  TeamSolution out;
  out.team_q.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  std::vector<double> v_next(S, 0.0), v(S, 0.0);
  std::vector<int> choice(static_cast<std::size_t>(H) * m * S, 0);
  for (int h = H - 1; h >= 0; --h) {
    for (int s = 0; s < S; ++s) {
      double* q = out.team_q.data() + (static_cast<std::size_t>(h) * S + s) * A;
      int best = 0;
      for (int a = 0; a < A; ++a) {
        double target = 0.0;
        for (double r : game.Rewards(h, s, a)) target += r;
        for (const Transition& t : game.Next(h, s, a)) {
          target += t.prob * v_next[t.next_state];
        }
        q[a] = target;
        if (q[a] > q[best] + kTieTolerance) best = a;
      }
      v[s] = q[best];
      for (int i = 0; i < m; ++i) {
        choice[(static_cast<std::size_t>(h) * m + i) * S + s] =
            game.shape().ActionOf(best, i);
      }
    }
    std::swap(v, v_next);
  }
  out.value = v_next[game.initial_state()];
  out.policy = JointPolicy::Deterministic(game.shape(), choice);
  return out;
}

}  // namespace marlhf
