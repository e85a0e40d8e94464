// Copyright 2026 The supergbd Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "supergbd/error.hpp"
#include "supergbd/tinynet.hpp"

namespace sg = supergbd;

namespace {

sg::MatrixF random_batch(int rows, int cols, sg::Rng& rng) {
  sg::MatrixF m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  return m;
}

std::vector<float> random_labels(int n, sg::Rng& rng) {
  std::vector<float> y(n);
  for (auto& v : y) v = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  return y;
}

// Graphs whose positive edges join equal one-hot blocks and negatives join orthogonal ones.
std::vector<sg::PatchGraph> separable_graphs(int copies, sg::Rng& rng) {
  std::vector<sg::PatchGraph> graphs;
  for (int g = 0; g < copies; ++g) {
    sg::PatchGraph graph;
    for (int k = 0; k < 6; ++k) {
      sg::PatchFeatures f;
      const float scale = static_cast<float>(rng.uniform(0.6, 1.0));
      f.rgb = {0.0f, 0.0f, 0.0f};
      f.rgb[k / 2] = scale;
      graph.patches.push_back(f);
    }
    const int pairs[6][3] = {{0, 1, 1}, {2, 3, 1}, {4, 5, 1}, {1, 2, 0}, {3, 4, 0}, {0, 5, 0}};
    for (const auto& p : pairs) {
      graph.edges.push_back({p[0], p[1], p[2] ? sg::EdgeLabel::kPositive : sg::EdgeLabel::kNegative, std::nullopt});
    }
    std::sort(graph.edges.begin(), graph.edges.end(),
              [](const auto& x, const auto& y) { return std::pair(x.a, x.b) < std::pair(y.a, y.b); });
    graph.gt_instance = {1, 1, 2, 2, 3, 3};
    graphs.push_back(std::move(graph));
  }
  return graphs;
}

sg::TrainConfig small_config() {
  sg::TrainConfig c;
  c.epochs = 3;
  c.batch_size = 16;
  c.hidden = {8, 8};
  c.features = {true, false, false, false};
  c.seed = 4;
  return c;
}

}  // namespace

TEST(Forward, ZeroModelGivesOneHalf) {
  const sg::MlpModel model({9, 4, 1}, 0.0f);
  sg::Rng rng(1);
  for (float p : sg::forward(model, random_batch(7, 9, rng), sg::Mode::kEval)) EXPECT_EQ(p, 0.5f);
}

TEST(Forward, HandSetSingleLayer) {
  sg::MlpModel model({2, 1}, 0.0f);
  model.layers()[0].weight << 1.0f, -1.0f;
  sg::MatrixF x(1, 2);
  x << 0.3f, 0.1f;
  EXPECT_NEAR(sg::forward(model, x, sg::Mode::kEval)[0], 0.549834, 1e-6);
}

TEST(Forward, InputDimensionMismatch) {
  const sg::MlpModel model({4, 1}, 0.0f);
  EXPECT_THROW(sg::forward(model, sg::MatrixF::Zero(2, 5), sg::Mode::kEval), sg::InvalidInput);
}

TEST(Forward, InvertedDropoutPreservesExpectedLogit) {
  const sg::MlpModel model = sg::MlpModel::initialized({6, 32, 1}, 0.3f, 8);
  sg::Rng rng(2);
  const sg::MatrixF x = random_batch(1, 6, rng);
  auto logit = [](double p) { return std::log(p / (1.0 - p)); };
  const double eval = logit(sg::forward(model, x, sg::Mode::kEval)[0]);
  double sum = 0.0;
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) sum += logit(sg::forward(model, x, sg::Mode::kTrain, &rng)[0]);
  EXPECT_NEAR(sum / draws, eval, 0.02 + 0.02 * std::abs(eval));
}

TEST(Bce, KnownValues) {
  const float one = 1.0f - 1e-7f;
  EXPECT_NEAR(sg::bce_loss(std::vector<float>{one}, std::vector<float>{1.0f}).loss, 0.0, 1e-6);
  EXPECT_NEAR(sg::bce_loss(std::vector<float>{0.5f}, std::vector<float>{1.0f}).loss, 0.693147, 1e-6);
  EXPECT_NEAR(sg::bce_loss(std::vector<float>{0.5f}, std::vector<float>{0.0f}).loss, 0.693147, 1e-6);
  // Predictions at 0 or 1 stay finite through clamping.
  EXPECT_TRUE(std::isfinite(sg::bce_loss(std::vector<float>{0.0f}, std::vector<float>{1.0f}).loss));
}

TEST(Gradients, MatchFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    sg::Rng rng(100 + seed);
    const sg::MlpModel model = sg::MlpModel::initialized({9, 8, 1}, 0.0f, seed);
    const sg::MatrixF x = random_batch(6, 9, rng);
    const auto check = sg::testing::gradient_check(model, x, random_labels(6, rng), 1e-4);
    EXPECT_GT(check.checked, 0);
    EXPECT_EQ(check.failed, 0) << "max relative error " << check.max_relative_error;
  }
}

TEST(Adam, SingleStepReducesSampleLoss) {
  sg::MlpModel model = sg::MlpModel::initialized({5, 6, 1}, 0.0f, 3);
  sg::Rng rng(3);
  const sg::MatrixF x = random_batch(1, 5, rng);
  const std::vector<float> y = {1.0f};
  const double before = sg::bce_loss(sg::forward(model, x, sg::Mode::kEval), y).loss;
  auto state = sg::AdamState::for_model(model);
  sg::backward_and_step(model, x, y, state, 1e-3, rng);
  const double after = sg::bce_loss(sg::forward(model, x, sg::Mode::kEval), y).loss;
  EXPECT_LT(after, before);
}

TEST(Adam, RepeatRunsAreBitIdentical) {
  auto run = [] {
    sg::MlpModel model = sg::MlpModel::initialized({9, 8, 1}, 0.3f, 5);
    sg::Rng rng(6);
    auto state = sg::AdamState::for_model(model);
    for (int s = 0; s < 100; ++s) {
      const sg::MatrixF x = random_batch(8, 9, rng);
      sg::backward_and_step(model, x, random_labels(8, rng), state, 1e-3, rng);
    }
    return sg::save_checkpoint(model);
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, SeparableToyIsLearned) {
  sg::Rng rng(7);
  const auto graphs = separable_graphs(100, rng);
  sg::TrainConfig config = small_config();
  config.epochs = 30;
  config.hidden = {16};
  config.dropout_rate = 0.0f;
  config.target_positive_fraction = 0.5;
  config.learning_rate = 1e-2;
  config.lr_step_epochs = 100;
  const auto result = sg::train(graphs, config);
  sg::PairSampler sampler(graphs, config.features);
  int correct = 0, total = 0;
  std::vector<float> row(sampler.pair_dim());
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    for (std::size_t e = 0; e < graphs[g].edges.size(); ++e) {
      for (bool swap : {false, true}) {
        sampler.write_pair(g, e, swap, row.data());
        const sg::MatrixF x = Eigen::Map<sg::MatrixF>(row.data(), 1, sampler.pair_dim());
        const bool predicted = sg::forward(result.model, x, sg::Mode::kEval)[0] >= 0.5f;
        correct += predicted == (graphs[g].edges[e].gt == sg::EdgeLabel::kPositive);
        ++total;
      }
    }
  }
  EXPECT_GE(static_cast<double>(correct) / total, 0.99);
}

TEST(Train, DeterministicUnderSeed) {
  sg::Rng rng(8);
  const auto graphs = separable_graphs(20, rng);
  const auto a = sg::train(graphs, small_config());
  const auto b = sg::train(graphs, small_config());
  EXPECT_EQ(sg::save_checkpoint(a.model), sg::save_checkpoint(b.model));
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_EQ(a.log[2].mean_loss, b.log[2].mean_loss);
}

TEST(Train, KeepsBestValidationEpoch) {
  sg::Rng rng(8);
  const auto graphs = separable_graphs(20, rng);
  int calls = 0;
  const double scores[] = {0.2, 0.9, 0.5};
  const auto r = sg::train(graphs, small_config(), [&](const sg::MlpModel&) { return scores[calls++]; });
  EXPECT_EQ(r.best_epoch, 2);
  EXPECT_EQ(r.log[1].validation_f, 0.9);
}

TEST(Train, StepSchedule) {
  sg::TrainConfig c;
  EXPECT_DOUBLE_EQ(c.learning_rate_for_epoch(1), 1e-3);
  EXPECT_DOUBLE_EQ(c.learning_rate_for_epoch(3), 1e-3);
  EXPECT_DOUBLE_EQ(c.learning_rate_for_epoch(4), 5e-4);
  EXPECT_DOUBLE_EQ(c.learning_rate_for_epoch(10), 1.25e-4);
}

TEST(Model, DefaultParameterCount) {
  const sg::MlpModel model({18, 256, 1024, 256, 1}, 0.3f);
  EXPECT_EQ(model.parameter_count(), 530689u);
}

TEST(Checkpoint, RoundTripAndSize) {
  const sg::MlpModel model = sg::MlpModel::initialized({18, 256, 1024, 256, 1}, 0.3f, 1);
  const auto bytes = sg::save_checkpoint(model);
  EXPECT_LE(bytes.size(), 5u * 1024 * 1024);
  const sg::MlpModel back = sg::load_checkpoint(bytes);
  EXPECT_EQ(back.dims(), model.dims());
  EXPECT_EQ(back.dropout_rate(), model.dropout_rate());
  EXPECT_EQ(sg::save_checkpoint(back), bytes);
}

TEST(Checkpoint, CorruptionDetected) {
  const auto bytes = sg::save_checkpoint(sg::MlpModel::initialized({4, 3, 1}, 0.0f, 1));
  auto truncated = bytes;
  truncated.resize(bytes.size() - 7);
  try {
    sg::load_checkpoint(truncated);
    FAIL() << "expected an error";
  } catch (const sg::Error& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
  auto flipped = bytes;
  flipped[30] ^= 0x40;
  EXPECT_THROW(sg::load_checkpoint(flipped), sg::Error);
}
