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

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "supergbd/patch_graph.hpp"
#include "supergbd/random.hpp"

namespace supergbd {

using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using VectorF = Eigen::VectorXf;

template <typename S>
struct BasicDenseLayer {
  Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> weight;  // out x in
  Eigen::Matrix<S, Eigen::Dynamic, 1> bias;                                  // out
};
using DenseLayer = BasicDenseLayer<float>;

// Fully-connected edge classifier: rectifier on hidden layers, sigmoid on
// the single output unit, inverted dropout on hidden activations in training.
class MlpModel {
 public:
  MlpModel() = default;
  // Zero-initialized parameters.
  MlpModel(std::vector<int> dims, float dropout_rate);

  // Uniform(+-sqrt(6 / (fan_in + fan_out))) weights, zero biases.
  static MlpModel initialized(std::vector<int> dims, float dropout_rate, std::uint64_t seed);

  const std::vector<int>& dims() const { return dims_; }
  int input_dim() const { return dims_.empty() ? 0 : dims_.front(); }
  int layer_count() const { return static_cast<int>(layers_.size()); }
  float dropout_rate() const { return dropout_rate_; }
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  void validate() const;

 private:
  std::vector<int> dims_;
  float dropout_rate_ = 0.0f;
  std::vector<DenseLayer> layers_;
};

enum class Mode { kTrain, kEval };

inline constexpr double kProbabilityEpsilon = 1e-7;

// Row-wise probabilities for a B x D input; `rng` is required in train mode.
std::vector<float> forward(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch, Mode mode,
                           Rng* rng = nullptr);

struct BceResult {
  double loss = 0.0;          // mean over the batch
  std::vector<double> grad;   // dL/dp per element
};

// Mean binary cross-entropy with p clamped to [eps, 1 - eps].
BceResult bce_loss(std::span<const float> probabilities, std::span<const float> labels);

template <typename S>
struct BasicGradients {
  double loss = 0.0;
  std::vector<BasicDenseLayer<S>> layers;
};
using Gradients = BasicGradients<float>;
using GradientsD = BasicGradients<double>;

// Full backpropagation; sigmoid and BCE are fused into (p - y) / B at the logit.
Gradients compute_gradients(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch,
                            std::span<const float> labels, Mode mode, Rng* rng = nullptr);

// The same backward pass evaluated in double precision, eval mode.
GradientsD compute_gradients_double(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch,
                                    std::span<const float> labels);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<DenseLayer> first_moment;
  std::vector<DenseLayer> second_moment;

  static AdamState for_model(const MlpModel& model);
};

void adam_update(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate);

// One training step; returns the batch loss measured before the update.
double backward_and_step(MlpModel& model, const Eigen::Ref<const MatrixF>& batch, std::span<const float> labels,
                         AdamState& state, double learning_rate, Rng& rng);

struct TrainConfig {
  int epochs = 10;
  double learning_rate = 1e-3;
  int lr_step_epochs = 3;
  double lr_decay = 0.5;
  int batch_size = 256;
  // Positive share per batch; nullopt samples edges at the corpus's own ratio.
  std::optional<double> target_positive_fraction = 0.25;
  std::uint64_t seed = 0;
  FeatureSubset features;
  std::vector<int> hidden = {256, 1024, 256};
  float dropout_rate = 0.3f;
  double validation_fraction = 0.1;

  void validate() const;
  // Step schedule; epochs are 1-based.
  double learning_rate_for_epoch(int epoch) const;
};

struct EpochLog {
  int epoch = 0;
  int steps = 0;
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  std::optional<double> validation_f;
};

struct TrainResult {
  MlpModel model;
  std::vector<EpochLog> log;
  int best_epoch = 0;
};

using ValidationFn = std::function<double(const MlpModel&)>;

// Runs epochs x (edges / batch) sampled steps and keeps the checkpoint with
// the best validation score (the last one when no validator is given).
TrainResult train(std::span<const PatchGraph> graphs, const TrainConfig& config, const ValidationFn& validator = {});

// Checkpoint: "SGBD", u32 version (1), u32 L, (L+1) x u32 dims, f32 dropout,
// per layer row-major weights then biases (f32 LE), u32 CRC32.
inline constexpr char kCheckpointMagic[4] = {'S', 'G', 'B', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const MlpModel& model);
MlpModel load_checkpoint(std::span<const std::uint8_t> bytes);

}  // namespace supergbd
