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
#include <set>

#include <gtest/gtest.h>

#include "test_util.h"

namespace marlhf {
namespace {

RewardModelConfig SmallConfig(double alpha, std::uint64_t seed = 0) {
  RewardModelConfig c;
  c.alpha = alpha;
  c.hidden = 16;
  c.epochs = 30;
  c.batch_size = 64;
  c.learning_rate = 3e-3;
  c.holdout_fraction = 0.2;
  c.seed = seed;
  return c;
}

class GridModelTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    game_ = new MarkovGame(BuildGridSpread({2, 3, 5}));
    data_ = new PreferenceDataset(
        testing::RawDataset(*game_, JointPolicy::Uniform(game_->shape()), 300, 4, 5.0));
    model_ = new PracticalRewardModel(
        TrainPracticalReward(*data_, StateActionEncoder(*game_), SmallConfig(0.0)));
  }
  static void TearDownTestSuite() {
    delete model_;
    delete data_;
    delete game_;
  }
  static MarkovGame* game_;
  static PreferenceDataset* data_;
  static PracticalRewardModel* model_;
};
MarkovGame* GridModelTest::game_ = nullptr;
PreferenceDataset* GridModelTest::data_ = nullptr;
PracticalRewardModel* GridModelTest::model_ = nullptr;

TEST(MlpTest, BackwardMatchesFiniteDifferences) {
  Mlp net(7, 5, 3);
  const std::vector<int> hot = {1, 4, 6};
  std::vector<double> grad(net.num_params(), 0.0);
  net.Backward(hot, 1.0, grad);
  for (std::size_t k = 0; k < net.num_params(); ++k) {
    const double saved = net.params()[k];
    const double eps = 1e-6;
    net.mutable_params()[k] = saved + eps;
    const double up = net.Forward(hot);
    net.mutable_params()[k] = saved - eps;
    const double down = net.Forward(hot);
    net.mutable_params()[k] = saved;
    EXPECT_NEAR(grad[k], (up - down) / (2 * eps), 1e-6) << "param " << k;
  }
}

TEST(EncoderTest, GridUsesCellsAndOwnAction) {
  const MarkovGame game = BuildGridSpread({2, 3, 5});
  const StateActionEncoder enc(game);
  EXPECT_EQ(enc.kind(), "grid");
  EXPECT_EQ(enc.input_dim(), 2 * 9 + 5);
  std::vector<int> hot;
  enc.Hot(testing::FindGridState(game, {4, 7}), 2, hot);
  EXPECT_EQ(std::set<int>(hot.begin(), hot.end()), (std::set<int>{4, 9 + 7, 18 + 2}));
}

TEST_F(GridModelTest, PoolStatisticsAreStandardized) {
  const std::set<int> holdout(model_->holdout().begin(), model_->holdout().end());
  for (int i = 0; i < 2; ++i) {
    double sum = 0.0, sq = 0.0;
    int count = 0;
    for (int p = 0; p < static_cast<int>(data_->pairs.size()); ++p) {
      if (holdout.count(p)) continue;
      for (const StepSequence* seq : {&data_->pairs[p].tau_a, &data_->pairs[p].tau_b}) {
        for (int h = 0; h < game_->horizon(); ++h) {
          const double z = model_->StandardizedPlayer(
              i, seq->states[h], game_->shape().ActionOf(seq->joint_actions[h], i));
          sum += z;
          sq += z * z;
          ++count;
        }
      }
    }
    const double mean = sum / count;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(sq / count - mean * mean, 1.0, 0.1);
  }
}

TEST_F(GridModelTest, AffineOutputChangesLeaveStandardizedRewardUnchanged) {
  const PracticalRewardModel moved = model_->AffineTransformed(3.7, -12.0);
  for (int s = 0; s < game_->num_states(); s += 5) {
    for (int a = 0; a < game_->num_joint_actions(); a += 3) {
      EXPECT_NEAR(moved.Standardized(game_->shape(), s, a),
                  model_->Standardized(game_->shape(), s, a), 1e-6);
    }
  }
}

TEST_F(GridModelTest, ConstantOutputStandardizesToZero) {
  const PracticalRewardModel flat = model_->AffineTransformed(0.0, 0.8);
  for (int s = 0; s < game_->num_states(); s += 4) {
    for (int a = 0; a < game_->num_joint_actions(); ++a) {
      EXPECT_EQ(flat.Standardized(game_->shape(), s, a), 0.0);
    }
  }
}

TEST_F(GridModelTest, PlainPreferenceLossDecreases) {
  const auto& log = model_->log();
  ASSERT_FALSE(log.empty());
  for (int i = 0; i < 2; ++i) {
    double first = NAN, last = NAN;
    for (const EpochLog& row : log) {
      if (row.player != i) continue;
      if (std::isnan(first)) first = row.loss;
      last = row.loss;
      EXPECT_DOUBLE_EQ(row.loss, row.nll);
    }
    EXPECT_LT(last, first);
  }
  EXPECT_LT(model_->metrics().train_nll, std::log(2.0));
  EXPECT_GT(model_->metrics().holdout_accuracy, 0.6);
}

TEST_F(GridModelTest, SameSeedTrainsIdentically) {
  const PracticalRewardModel again =
      TrainPracticalReward(*data_, StateActionEncoder(*game_), SmallConfig(0.0));
  EXPECT_EQ(again.ToJson("h"), model_->ToJson("h"));
  const PracticalRewardModel loaded = PracticalRewardModel::FromJson(model_->ToJson("h"));
  EXPECT_EQ(loaded.ToJson("h"), model_->ToJson("h"));
  EXPECT_EQ(loaded.Predict(1, 3, 2), model_->Predict(1, 3, 2));
}

TEST_F(GridModelTest, MseMetricIsBounded) {
  const auto probe = HoldoutSequences(*model_, *data_);
  EXPECT_EQ(probe.size(), 2 * model_->holdout().size());
  const double mse = RewardMseMetric(*model_, *game_, probe);
  EXPECT_GE(mse, 0.0);
  EXPECT_LE(mse, 4.0);
}

// Five-epoch window means of the plain preference loss never go up when the
// labels come from the logistic model at steepness 1.
TEST(TrainingTest, PlainLossDecreasesOverWindows) {
  const MarkovGame game = BuildGridSpread({2, 3, 5});
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 400, 8, 1.0);
  RewardModelConfig config = SmallConfig(0.0, 2);
  config.epochs = 40;
  config.learning_rate = 1e-3;
  const PracticalRewardModel model =
      TrainPracticalReward(data, StateActionEncoder(game), config);
  for (int i = 0; i < 2; ++i) {
    std::vector<double> loss;
    for (const EpochLog& row : model.log()) {
      if (row.player == i) loss.push_back(row.loss);
    }
    ASSERT_EQ(loss.size(), 40u);
    double last = INFINITY;
    for (std::size_t w = 0; w + 5 <= loss.size(); w += 5) {
      double mean = 0.0;
      for (std::size_t k = w; k < w + 5; ++k) mean += loss[k] / 5;
      EXPECT_LE(mean, last) << "player " << i << " window " << w / 5;
      last = mean;
    }
  }
}

// The smoothness penalty trades preference fit for flatness.
TEST(TrainingTest, TrainingNllNonDecreasingInAlpha) {
  const MarkovGame game = BuildGridSpread({2, 3, 5});
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 400, 8, 5.0);
  double last = -INFINITY;
  for (double alpha : {0.0, 1.0, 100.0, 1000.0}) {
    const double nll = TrainPracticalReward(data, StateActionEncoder(game), SmallConfig(alpha))
                           .metrics()
                           .train_nll;
    EXPECT_GE(nll, last) << "alpha " << alpha;
    last = nll;
  }
}

TEST(StandardizedMseTest, TruthNegationAndIndependence) {
  Rng rng(12);
  std::vector<double> x(100000), neg(x.size()), other(x.size()), shifted(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    x[k] = Uniform01(rng);
    neg[k] = -x[k];
    other[k] = Uniform01(rng);
    shifted[k] = 5.0 * x[k] + 2.0;
  }
  EXPECT_NEAR(StandardizedMse(x, x), 0.0, 1e-12);
  EXPECT_NEAR(StandardizedMse(x, shifted), 0.0, 1e-12);
  EXPECT_NEAR(StandardizedMse(x, neg), 4.0, 1e-9);
  EXPECT_NEAR(StandardizedMse(x, other), 2.0, 0.05);
  EXPECT_THROW(StandardizedMse(x, std::vector<double>{1.0}), DimensionError);
}

// With a constant ground truth the labels carry no signal; the smoothness
// term should keep per-step predictions close to a constant along each
// trajectory.
TEST(SmoothnessTest, ConstantRewardGivesFlatPredictions) {
  const MarkovGame game = testing::UniformTransitionGame(
      2, 5, 9, {3, 3}, [](int, int, int, int) { return 0.5; });
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 300, 6);
  const PracticalRewardModel model =
      TrainPracticalReward(data, StateActionEncoder(game), SmallConfig(1.0));
  double cv_sum = 0.0;
  int count = 0;
  for (const StepSequence& seq : HoldoutSequences(model, data)) {
    for (int i = 0; i < 2; ++i) {
      double sum = 0.0, sq = 0.0;
      for (int h = 0; h < 5; ++h) {
        const double r = model.Predict(
            i, seq.states[h], game.shape().ActionOf(seq.joint_actions[h], i));
        sum += r;
        sq += r * r;
      }
      const double mean = sum / 5;
      const double sd = std::sqrt(std::max(0.0, sq / 5 - mean * mean));
      cv_sum += sd / std::abs(mean);
      ++count;
    }
  }
  EXPECT_LT(cv_sum / count, 0.5);
}

TEST(RewardModelTest, RejectsNegativeAlpha) {
  const MarkovGame game = BuildGridSpread({2, 3, 2});
  const PreferenceDataset data =
      testing::RawDataset(game, JointPolicy::Uniform(game.shape()), 10, 1);
  EXPECT_THROW(TrainPracticalReward(data, StateActionEncoder(game), SmallConfig(-1.0)),
               ConfigError);
}

}  // namespace
}  // namespace marlhf
