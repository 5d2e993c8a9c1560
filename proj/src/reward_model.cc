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

#include "marlhf/reward_model.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "marlhf/simd/kernels.h"

namespace marlhf {

using nlohmann::json;

StateActionEncoder::StateActionEncoder(const MarkovGame& game)
    : num_states_(game.num_states()),
      action_counts_(game.shape().action_counts()) {
  max_actions_ = *std::max_element(action_counts_.begin(), action_counts_.end());
  const auto& meta = game.metadata();
  if (meta.count("grid.size") && meta.count("grid.agents")) {
    grid_ = true;
    const int g = std::stoi(meta.at("grid.size"));
    const int n = std::stoi(meta.at("grid.agents"));
    state_dim_ = n * g * g;
    active_per_state_ = n;
    active_.reserve(static_cast<std::size_t>(num_states_) * n);
    for (int s = 0; s < num_states_; ++s) {
      const std::vector<int> cells = GridCells(game, s);
      for (int j = 0; j < n; ++j) active_.push_back(j * g * g + cells[j]);
    }
  } else {
    state_dim_ = num_states_;
    active_per_state_ = 1;
    active_.resize(num_states_);
    std::iota(active_.begin(), active_.end(), 0);
  }
}

void StateActionEncoder::Hot(int s, int own_action,
                             std::vector<int>& out) const {
  out.clear();
  const auto* begin =
      active_.data() + static_cast<std::size_t>(s) * active_per_state_;
  out.insert(out.end(), begin, begin + active_per_state_);
  out.push_back(state_dim_ + own_action);
}

namespace {

struct Workspace {
  std::vector<double> h1, h2, d1, d2;
};

Workspace& Scratch(int hidden) {
  thread_local Workspace ws;
  if (static_cast<int>(ws.h1.size()) != hidden) {
    ws.h1.assign(hidden, 0.0);
    ws.h2.assign(hidden, 0.0);
    ws.d1.assign(hidden, 0.0);
    ws.d2.assign(hidden, 0.0);
  }
  return ws;
}

}  // namespace

Mlp::Mlp(int input_dim, int hidden, std::uint64_t seed)
    : in_(input_dim), hidden_(hidden) {
  if (input_dim < 1 || hidden < 1) throw ConfigError("empty network layer");
  params_.assign(b3() + 1, 0.0);
  Rng rng(seed);
  auto fill = [&](std::size_t begin, std::size_t count, double limit) {
    for (std::size_t k = 0; k < count; ++k) {
      params_[begin + k] = (2.0 * Uniform01(rng) - 1.0) * limit;
    }
  };
  fill(w1(), static_cast<std::size_t>(in_) * hidden_, std::sqrt(6.0 / in_));
  fill(w2(), static_cast<std::size_t>(hidden_) * hidden_,
       std::sqrt(6.0 / hidden_));
  fill(w3(), hidden_, std::sqrt(6.0 / (hidden_ + 1)));
}

double Mlp::Forward(std::span<const int> hot) const {
  Workspace& ws = Scratch(hidden_);
  const std::span<const double> p(params_);
  const std::size_t h = hidden_;
  std::copy_n(params_.begin() + static_cast<long>(b1()), h, ws.h1.begin());
  for (int j : hot) simd::Axpy(1.0, p.subspan(w1() + j * h, h), ws.h1);
  for (double& v : ws.h1) v = std::max(0.0, v);
  simd::Gemv(p.subspan(w2(), h * h), h, h, ws.h1, ws.h2);
  for (std::size_t k = 0; k < h; ++k) {
    ws.h2[k] = std::max(0.0, ws.h2[k] + params_[b2() + k]);
  }
  return simd::Dot(p.subspan(w3(), h), ws.h2) + params_[b3()];
}

void Mlp::Backward(std::span<const int> hot, double output_grad,
                   std::span<double> grad) const {
  Forward(hot);
  Workspace& ws = Scratch(hidden_);
  const std::span<const double> p(params_);
  const std::size_t h = hidden_;
  simd::Axpy(output_grad, ws.h2, grad.subspan(w3(), h));
  grad[b3()] += output_grad;
  for (std::size_t k = 0; k < h; ++k) {
    ws.d2[k] = ws.h2[k] > 0.0 ? output_grad * params_[w3() + k] : 0.0;
  }
  simd::Ger(1.0, ws.d2, ws.h1, grad.subspan(w2(), h * h));
  simd::Axpy(1.0, ws.d2, grad.subspan(b2(), h));
  std::fill(ws.d1.begin(), ws.d1.end(), 0.0);
  simd::GemvTransposedAcc(p.subspan(w2(), h * h), h, h, ws.d2, ws.d1);
  for (std::size_t k = 0; k < h; ++k) {
    if (ws.h1[k] <= 0.0) ws.d1[k] = 0.0;
  }
  simd::Axpy(1.0, ws.d1, grad.subspan(b1(), h));
  for (int j : hot) simd::Axpy(1.0, ws.d1, grad.subspan(w1() + j * h, h));
}

double PracticalRewardModel::Predict(int player, int s, int own_action) const {
  thread_local std::vector<int> hot;
  encoder_.Hot(s, own_action, hot);
  return out_scale_[player] * nets_[player].Forward(hot) + out_shift_[player];
}

double PracticalRewardModel::StandardizedPlayer(int player, int s,
                                                int own_action) const {
  const double sd = variance_[player] > 0.0 ? std::sqrt(variance_[player]) : 1.0;
  return (Predict(player, s, own_action) - mean_[player]) / sd;
}

double PracticalRewardModel::Standardized(const GameShape& shape, int s,
                                          int joint) const {
  double total = 0.0;
  for (int i = 0; i < num_players(); ++i) {
    total += StandardizedPlayer(i, s, shape.ActionOf(joint, i));
  }
  return total;
}

PracticalRewardModel PracticalRewardModel::AffineTransformed(
    double scale, double shift) const {
  PracticalRewardModel out = *this;
  for (int i = 0; i < num_players(); ++i) {
    out.out_scale_[i] = scale * out_scale_[i];
    out.out_shift_[i] = scale * out_shift_[i] + shift;
    out.mean_[i] = scale * mean_[i] + shift;
    out.variance_[i] = scale * scale * variance_[i];
  }
  return out;
}

namespace {

// One player's view of the training data: every step mapped to a slot, the
// index of its distinct (s, a_i) input.
struct SlotData {
  std::vector<std::vector<int>> hot;  // per slot
  std::vector<int> steps;             // [(pair * 2 + side) * H + h]
  int horizon = 0;

  int Step(int pair, int side, int h) const {
    return steps[(static_cast<std::size_t>(pair) * 2 + side) * horizon + h];
  }
};

SlotData BuildSlots(const PreferenceDataset& dataset,
                    const StateActionEncoder& encoder, int player) {
  SlotData data;
  data.horizon = dataset.meta.horizon;
  const int a_i = encoder.action_counts()[player];
  int stride = 1;
  for (int j = player + 1; j < static_cast<int>(encoder.action_counts().size());
       ++j) {
    stride *= encoder.action_counts()[j];
  }
  std::vector<int> slot_of(static_cast<std::size_t>(encoder.num_states()) * a_i,
                           -1);
  data.steps.reserve(dataset.pairs.size() * 2 * data.horizon);
  std::vector<int> hot;
  for (const PreferencePair& pair : dataset.pairs) {
    for (const StepSequence* seq : {&pair.tau_a, &pair.tau_b}) {
      for (int h = 0; h < data.horizon; ++h) {
        const int s = seq->states[h];
        const int own = (seq->joint_actions[h] / stride) % a_i;
        int& slot = slot_of[static_cast<std::size_t>(s) * a_i + own];
        if (slot < 0) {
          slot = static_cast<int>(data.hot.size());
          encoder.Hot(s, own, hot);
          data.hot.push_back(hot);
        }
        data.steps.push_back(slot);
      }
    }
  }
  return data;
}

struct Adam {
  std::vector<double> m, v;
  int t = 0;
  void Step(std::span<double> params, std::span<const double> grad,
            double lr) {
    if (m.empty()) {
      m.assign(params.size(), 0.0);
      v.assign(params.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(0.9, t);
    const double c2 = 1.0 - std::pow(0.999, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      m[k] = 0.9 * m[k] + 0.1 * grad[k];
      v[k] = 0.999 * v[k] + 0.001 * grad[k] * grad[k];
      params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + 1e-8);
    }
  }
};

// Mean and variance of the network output over every training step.
std::pair<double, double> PoolStats(const Mlp& net, const SlotData& slots,
                                    std::span<const int> train) {
  std::vector<double> pred(slots.hot.size());
  for (std::size_t k = 0; k < pred.size(); ++k) pred[k] = net.Forward(slots.hot[k]);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (int p : train) {
    for (int side = 0; side < 2; ++side) {
      for (int h = 0; h < slots.horizon; ++h) {
        const double r = pred[slots.Step(p, side, h)];
        sum += r;
        sum_sq += r * r;
        ++n;
      }
    }
  }
  const double mean = sum / std::max<std::size_t>(n, 1);
  return {mean, std::max(0.0, sum_sq / std::max<std::size_t>(n, 1) - mean * mean)};
}

}  // namespace

PracticalRewardModel TrainPracticalReward(const PreferenceDataset& dataset,
                                          const StateActionEncoder& encoder,
                                          const RewardModelConfig& config) {
  if (dataset.pairs.empty()) throw ConfigError("empty preference dataset");
  if (config.alpha < 0.0) throw ConfigError("alpha must be nonnegative");
  if (config.batch_size < 1 || config.epochs < 0) {
    throw ConfigError("batch size must be positive and epochs nonnegative");
  }
  const int n = static_cast<int>(dataset.pairs.size());
  const int m = static_cast<int>(dataset.pairs.front().labels.size());
  const int H = dataset.meta.horizon;
  if (H < 1) throw ConfigError("dataset header has no horizon");

  PracticalRewardModel model;
  model.encoder_ = encoder;
  model.config_ = config;

  // Seeded holdout split.
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(DeriveSeed(config.seed, 0));
  for (int k = n - 1; k > 0; --k) {
    std::swap(order[k], order[static_cast<int>(Uniform01(split_rng) * (k + 1))]);
  }
  const int n_hold = static_cast<int>(std::floor(config.holdout_fraction * n));
  model.holdout_.assign(order.begin(), order.begin() + n_hold);
  std::sort(model.holdout_.begin(), model.holdout_.end());
  std::vector<int> train(order.begin() + n_hold, order.end());
  std::sort(train.begin(), train.end());
  if (train.empty()) throw SizingError("no training pairs left after holdout");

  std::vector<double> pred, slot_grad;
  std::vector<int> stamp, touched;
  for (int i = 0; i < m; ++i) {
    const SlotData slots = BuildSlots(dataset, encoder, i);
    Mlp net(encoder.input_dim(), config.hidden, DeriveSeed(config.seed, 100 + i));
    Adam adam;
    std::vector<double> grad(net.num_params());
    Rng rng(DeriveSeed(config.seed, 200 + i));
    std::vector<int> epoch_order = train;
    pred.assign(slots.hot.size(), 0.0);
    slot_grad.assign(slots.hot.size(), 0.0);
    stamp.assign(slots.hot.size(), -1);
    int batch_id = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      const double var = PoolStats(net, slots, train).second;
      // Detached: a constant within the epoch.
      const double coeff = var > 0.0 ? config.alpha / var : 0.0;
      for (int k = static_cast<int>(epoch_order.size()) - 1; k > 0; --k) {
        std::swap(epoch_order[k],
                  epoch_order[static_cast<int>(Uniform01(rng) * (k + 1))]);
      }
      double epoch_nll = 0.0, epoch_mse = 0.0;
      for (std::size_t start = 0; start < epoch_order.size();
           start += config.batch_size, ++batch_id) {
        const std::size_t end =
            std::min(epoch_order.size(), start + config.batch_size);
        const double scale = 1.0 / static_cast<double>(end - start);
        touched.clear();
        for (std::size_t b = start; b < end; ++b) {
          for (int side = 0; side < 2; ++side) {
            for (int h = 0; h < H; ++h) {
              const int slot = slots.Step(epoch_order[b], side, h);
              if (stamp[slot] != batch_id) {
                stamp[slot] = batch_id;
                touched.push_back(slot);
                pred[slot] = net.Forward(slots.hot[slot]);
                slot_grad[slot] = 0.0;
              }
            }
          }
        }
        for (std::size_t b = start; b < end; ++b) {
          const int p = epoch_order[b];
          const int y = dataset.pairs[p].labels[i];
          double z = 0.0;
          for (int h = 0; h < H; ++h) {
            z += pred[slots.Step(p, 0, h)] - pred[slots.Step(p, 1, h)];
          }
          epoch_nll += Softplus(-y * z);
          const double dz = -y * Sigmoid(-y * z) * scale;
          for (int h = 0; h < H; ++h) {
            slot_grad[slots.Step(p, 0, h)] += dz;
            slot_grad[slots.Step(p, 1, h)] -= dz;
          }
          for (int side = 0; side < 2; ++side) {
            for (int h = 0; h + 1 < H; ++h) {
              const int u = slots.Step(p, side, h);
              const int w = slots.Step(p, side, h + 1);
              const double diff = pred[u] - pred[w];
              epoch_mse += diff * diff;
              slot_grad[u] += 2.0 * coeff * diff * scale;
              slot_grad[w] -= 2.0 * coeff * diff * scale;
            }
          }
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        for (int slot : touched) {
          if (slot_grad[slot] != 0.0) {
            net.Backward(slots.hot[slot], slot_grad[slot], grad);
          }
        }
        adam.Step(net.mutable_params(), grad, config.learning_rate);
      }
      EpochLog row;
      row.epoch = epoch;
      row.player = i;
      row.nll = epoch_nll / train.size();
      row.mse = epoch_mse / train.size();
      row.loss = row.nll + coeff * row.mse;
      row.variance = var;
      if (!std::isfinite(row.loss)) {
        throw NumericalError(fmt::format(
            "reward model loss became non-finite at epoch {} (player {})",
            epoch, i));
      }
      model.log_.push_back(row);
    }
    const auto [mean, var] = PoolStats(net, slots, train);
    if (!(var > 0.0)) {
      spdlog::warn("reward model for player {} has zero output variance; "
                   "standardization falls back to a unit divisor", i);
    }
    model.nets_.push_back(std::move(net));
    model.mean_.push_back(mean);
    model.variance_.push_back(var);
    model.out_scale_.push_back(1.0);
    model.out_shift_.push_back(0.0);
  }

  // Metrics.
  RewardModelMetrics& metrics = model.metrics_;
  metrics.train_pairs = static_cast<int>(train.size());
  metrics.holdout_pairs = n_hold;
  const GameShape shape(m, H, encoder.num_states(), encoder.action_counts());
  auto seq_pred = [&](int i, const StepSequence& seq, std::vector<double>& out) {
    out.resize(H);
    for (int h = 0; h < H; ++h) {
      out[h] = model.Predict(i, seq.states[h],
                             shape.ActionOf(seq.joint_actions[h], i));
    }
  };
  std::vector<double> ra, rb;
  double nll = 0.0;
  for (int p : train) {
    for (int i = 0; i < m; ++i) {
      seq_pred(i, dataset.pairs[p].tau_a, ra);
      seq_pred(i, dataset.pairs[p].tau_b, rb);
      const double z = std::accumulate(ra.begin(), ra.end(), 0.0) -
                       std::accumulate(rb.begin(), rb.end(), 0.0);
      nll += Softplus(-dataset.pairs[p].labels[i] * z);
    }
  }
  metrics.train_nll = nll / (static_cast<double>(train.size()) * m);
  const std::vector<int>& probe = n_hold > 0 ? model.holdout_ : train;
  double correct = 0.0, smooth = 0.0;
  for (int p : probe) {
    for (int i = 0; i < m; ++i) {
      seq_pred(i, dataset.pairs[p].tau_a, ra);
      seq_pred(i, dataset.pairs[p].tau_b, rb);
      const double z = std::accumulate(ra.begin(), ra.end(), 0.0) -
                       std::accumulate(rb.begin(), rb.end(), 0.0);
      const int y = dataset.pairs[p].labels[i];
      correct += z == 0.0 ? 0.5 : (z * y > 0.0 ? 1.0 : 0.0);
      const double sd =
          model.variance_[i] > 0.0 ? std::sqrt(model.variance_[i]) : 1.0;
      for (const std::vector<double>* r : {&ra, &rb}) {
        for (int h = 0; h + 1 < H; ++h) {
          const double d = ((*r)[h + 1] - (*r)[h]) / sd;
          smooth += d * d;
        }
      }
    }
  }
  metrics.holdout_accuracy = correct / (static_cast<double>(probe.size()) * m);
  metrics.smoothness = smooth / (2.0 * probe.size() * m);
  metrics.degenerate = metrics.holdout_accuracy <= config.degeneracy_threshold;
  return model;
}

double StandardizedMse(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty()) {
    throw DimensionError("standardized MSE needs equal nonempty inputs");
  }
  auto stats = [](std::span<const double> v) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double var = 0.0;
    for (double e : v) var += (e - mean) * (e - mean);
    var /= v.size();
    return std::pair{mean, var > 0.0 ? std::sqrt(var) : 1.0};
  };
  const auto [mx, sx] = stats(x);
  const auto [my, sy] = stats(y);
  double total = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = (x[k] - mx) / sx - (y[k] - my) / sy;
    total += d * d;
  }
  return total / x.size();
}

double RewardMseMetric(const PracticalRewardModel& model,
                       const MarkovGame& oracle,
                       std::span<const StepSequence> probe) {
  std::vector<double> pred, truth;
  for (const StepSequence& seq : probe) {
    for (std::size_t h = 0; h < seq.joint_actions.size(); ++h) {
      const int s = seq.states[h];
      const int a = seq.joint_actions[h];
      pred.push_back(model.Standardized(oracle.shape(), s, a));
      double r = 0.0;
      for (double v : oracle.Rewards(static_cast<int>(h), s, a)) r += v;
      truth.push_back(r);
    }
  }
  return StandardizedMse(pred, truth);
}

std::vector<StepSequence> HoldoutSequences(const PracticalRewardModel& model,
                                           const PreferenceDataset& dataset) {
  std::vector<StepSequence> out;
  for (int p : model.holdout()) {
    out.push_back(dataset.pairs[p].tau_a);
    out.push_back(dataset.pairs[p].tau_b);
  }
  return out;
}

std::string PracticalRewardModel::ToJson(const std::string& config_hash) const {
  json doc;
  doc["schema"] = "marlhf.reward_model/1";
  doc["config_hash"] = config_hash;
  doc["config"] = {{"alpha", config_.alpha},
                   {"hidden", config_.hidden},
                   {"epochs", config_.epochs},
                   {"batch_size", config_.batch_size},
                   {"learning_rate", config_.learning_rate},
                   {"holdout_fraction", config_.holdout_fraction},
                   {"degeneracy_threshold", config_.degeneracy_threshold},
                   {"seed", config_.seed}};
  doc["encoder"] = {{"grid", encoder_.grid_},
                    {"num_states", encoder_.num_states_},
                    {"state_dim", encoder_.state_dim_},
                    {"max_actions", encoder_.max_actions_},
                    {"action_counts", encoder_.action_counts_},
                    {"active_per_state", encoder_.active_per_state_},
                    {"active", encoder_.active_}};
  json players = json::array();
  for (int i = 0; i < num_players(); ++i) {
    players.push_back({{"input_dim", nets_[i].input_dim()},
                       {"hidden", nets_[i].hidden()},
                       {"params", std::vector<double>(nets_[i].params().begin(),
                                                      nets_[i].params().end())},
                       {"mean", mean_[i]},
                       {"variance", variance_[i]},
                       {"scale", out_scale_[i]},
                       {"shift", out_shift_[i]}});
  }
  doc["players"] = players;
  doc["metrics"] = {{"train_nll", metrics_.train_nll},
                    {"holdout_accuracy", metrics_.holdout_accuracy},
                    {"smoothness", metrics_.smoothness},
                    {"degenerate", metrics_.degenerate},
                    {"train_pairs", metrics_.train_pairs},
                    {"holdout_pairs", metrics_.holdout_pairs}};
  doc["holdout"] = holdout_;
  return doc.dump();
}

PracticalRewardModel PracticalRewardModel::FromJson(const std::string& text) {
  const json doc = json::parse(text);
  if (doc.value("schema", "") != "marlhf.reward_model/1") {
    throw ConfigError("not a marlhf.reward_model/1 document");
  }
  PracticalRewardModel model;
  const json& c = doc.at("config");
  model.config_.alpha = c.at("alpha");
  model.config_.hidden = c.at("hidden");
  model.config_.epochs = c.at("epochs");
  model.config_.batch_size = c.at("batch_size");
  model.config_.learning_rate = c.at("learning_rate");
  model.config_.holdout_fraction = c.at("holdout_fraction");
  model.config_.degeneracy_threshold = c.at("degeneracy_threshold");
  model.config_.seed = c.at("seed");
  const json& e = doc.at("encoder");
  model.encoder_.grid_ = e.at("grid");
  model.encoder_.num_states_ = e.at("num_states");
  model.encoder_.state_dim_ = e.at("state_dim");
  model.encoder_.max_actions_ = e.at("max_actions");
  model.encoder_.action_counts_ = e.at("action_counts").get<std::vector<int>>();
  model.encoder_.active_per_state_ = e.at("active_per_state");
  model.encoder_.active_ = e.at("active").get<std::vector<int>>();
  for (const json& p : doc.at("players")) {
    Mlp net(p.at("input_dim"), p.at("hidden"), 0);
    const std::vector<double> params = p.at("params").get<std::vector<double>>();
    if (params.size() != net.num_params()) {
      throw ConfigError("reward model parameter count mismatch");
    }
    std::copy(params.begin(), params.end(), net.mutable_params().begin());
    model.nets_.push_back(std::move(net));
    model.mean_.push_back(p.at("mean"));
    model.variance_.push_back(p.at("variance"));
    model.out_scale_.push_back(p.at("scale"));
    model.out_shift_.push_back(p.at("shift"));
  }
  const json& mt = doc.at("metrics");
  model.metrics_.train_nll = mt.at("train_nll");
  model.metrics_.holdout_accuracy = mt.at("holdout_accuracy");
  model.metrics_.smoothness = mt.at("smoothness");
  model.metrics_.degenerate = mt.at("degenerate");
  model.metrics_.train_pairs = mt.at("train_pairs");
  model.metrics_.holdout_pairs = mt.at("holdout_pairs");
  model.holdout_ = doc.at("holdout").get<std::vector<int>>();
  return model;
}

}  // namespace marlhf
