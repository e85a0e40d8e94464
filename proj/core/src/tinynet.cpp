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

#include "supergbd/tinynet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <iterator>

#include "supergbd/checksum.hpp"
#include "supergbd/error.hpp"

namespace supergbd {

MlpModel::MlpModel(std::vector<int> dims, float dropout_rate) : dims_(std::move(dims)), dropout_rate_(dropout_rate) {
  if (dims_.size() < 2) throw InvalidInput("model needs at least an input and an output dimension");
  if (dims_.back() != 1) throw InvalidInput("model output dimension must be 1");
  for (int d : dims_) {
    if (d < 1) throw InvalidInput("layer dimensions must be >= 1");
  }
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) throw InvalidInput("dropout rate must lie in [0, 1)");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    layers_.push_back(DenseLayer{MatrixF::Zero(dims_[l + 1], dims_[l]), VectorF::Zero(dims_[l + 1])});
  }
}

MlpModel MlpModel::initialized(std::vector<int> dims, float dropout_rate, std::uint64_t seed) {
  MlpModel model(std::move(dims), dropout_rate);
  Rng rng(seed);
  for (auto& layer : model.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
  return model;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    n += static_cast<std::size_t>(dims_[l]) * dims_[l + 1] + dims_[l + 1];
  }
  return n;
}

void MlpModel::validate() const {
  if (layers_.size() + 1 != dims_.size()) throw InvalidInput("model layer count does not match dims");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.weight.rows() != dims_[l + 1] || layer.weight.cols() != dims_[l] || layer.bias.size() != dims_[l + 1]) {
      throw InvalidInput("layer " + std::to_string(l) + " shape disagrees with dims");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw InvalidInput("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
}

namespace {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename S>
S sigmoid(S z) {
  return S(1) / (S(1) + std::exp(-z));
}

template <typename S>
struct ForwardCache {
  std::vector<Mat<S>> inputs;    // input to each layer (post-activation of previous)
  std::vector<Mat<S>> masks;     // scaled dropout masks per hidden layer (empty in eval)
  std::vector<Mat<S>> pre;       // pre-activations per layer
  std::vector<S> probabilities;  // unclamped sigmoid output
};

void check_input(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch) {
  if (model.layers().empty()) throw InvalidInput("model has no layers");
  if (batch.cols() != model.input_dim()) {
    throw InvalidInput("input dimension " + std::to_string(batch.cols()) + " does not match model input " +
                       std::to_string(model.input_dim()));
  }
  if (!batch.allFinite()) throw InvalidInput("non-finite value in model input");
}

template <typename S>
std::vector<BasicDenseLayer<S>> layers_as(const MlpModel& model) {
  std::vector<BasicDenseLayer<S>> out;
  for (const auto& l : model.layers()) out.push_back({l.weight.cast<S>(), l.bias.cast<S>()});
  return out;
}

template <typename S>
ForwardCache<S> run_forward(const std::vector<BasicDenseLayer<S>>& layers, float rate, const Mat<S>& batch, Mode mode,
                            Rng* rng, bool keep) {
  if (mode == Mode::kTrain && rng == nullptr) throw InvalidInput("train-mode forward requires an rng");
  const std::size_t n_layers = layers.size();
  const bool dropout = mode == Mode::kTrain && rate > 0.0f;
  const S keep_scale = dropout ? S(1) / (S(1) - S(rate)) : S(1);

  ForwardCache<S> cache;
  Mat<S> activation = batch;
  for (std::size_t l = 0; l < n_layers; ++l) {
    Mat<S> z(activation.rows(), layers[l].weight.rows());
    z.noalias() = activation * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (keep) cache.inputs.push_back(std::move(activation));
    if (l + 1 == n_layers) {
      cache.probabilities.resize(z.rows());
      for (Eigen::Index i = 0; i < z.rows(); ++i) cache.probabilities[i] = sigmoid(z(i, 0));
      if (keep) cache.pre.push_back(std::move(z));
      break;
    }
    activation = z.cwiseMax(S(0));
    if (dropout) {
      Mat<S> mask(activation.rows(), activation.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng->bernoulli(rate) ? S(0) : keep_scale;
      }
      activation.array() *= mask.array();
      if (keep) cache.masks.push_back(std::move(mask));
    }
    if (keep) cache.pre.push_back(std::move(z));
  }
  return cache;
}

template <typename S>
double mean_bce(const std::vector<S>& probabilities, std::span<const float> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp<double>(probabilities[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    const double y = labels[i];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return total / static_cast<double>(probabilities.size());
}

template <typename S>
BasicGradients<S> backpropagate(const std::vector<BasicDenseLayer<S>>& layers, float rate, const Mat<S>& batch,
                                std::span<const float> labels, Mode mode, Rng* rng) {
  if (labels.size() != static_cast<std::size_t>(batch.rows())) throw InvalidInput("label count does not match batch");
  if (labels.empty()) throw InvalidInput("empty batch");
  ForwardCache<S> cache = run_forward(layers, rate, batch, mode, rng, true);
  const std::size_t n_layers = layers.size();
  const Eigen::Index rows = batch.rows();

  BasicGradients<S> grads;
  grads.loss = mean_bce(cache.probabilities, labels);
  grads.layers.resize(n_layers);

  Mat<S> delta(rows, 1);
  for (Eigen::Index i = 0; i < rows; ++i) {
    delta(i, 0) = (cache.probabilities[i] - S(labels[i])) / static_cast<S>(rows);
  }
  for (std::size_t l = n_layers; l-- > 0;) {
    grads.layers[l].weight.noalias() = delta.transpose() * cache.inputs[l];
    grads.layers[l].bias = delta.colwise().sum().transpose();
    if (l == 0) break;
    Mat<S> upstream(rows, layers[l].weight.cols());
    upstream.noalias() = delta * layers[l].weight;
    const Mat<S>& z = cache.pre[l - 1];
    if (!cache.masks.empty()) upstream.array() *= cache.masks[l - 1].array();
    upstream.array() *= (z.array() > S(0)).template cast<S>();
    delta = std::move(upstream);
  }
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (!grads.layers[l].weight.allFinite() || !grads.layers[l].bias.allFinite()) {
      throw Error("non-finite gradient in layer " + std::to_string(l) + " (loss " + std::to_string(grads.loss) + ")");
    }
  }
  return grads;
}

}  // namespace

std::vector<float> forward(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch, Mode mode, Rng* rng) {
  check_input(model, batch);
  ForwardCache<float> cache = run_forward<float>(model.layers(), model.dropout_rate(), batch, mode, rng, false);
  constexpr float lo = static_cast<float>(kProbabilityEpsilon);
  constexpr float hi = 1.0f - static_cast<float>(kProbabilityEpsilon);
  for (float& p : cache.probabilities) p = std::clamp(p, lo, hi);
  return std::move(cache.probabilities);
}

BceResult bce_loss(std::span<const float> probabilities, std::span<const float> labels) {
  if (probabilities.size() != labels.size()) throw InvalidInput("bce_loss: length mismatch");
  if (probabilities.empty()) throw InvalidInput("bce_loss: empty batch");
  BceResult result;
  result.grad.resize(probabilities.size());
  const double n = static_cast<double>(probabilities.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp<double>(probabilities[i], kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
    const double y = labels[i];
    total += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    result.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  result.loss = total / n;
  return result;
}

Gradients compute_gradients(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch,
                            std::span<const float> labels, Mode mode, Rng* rng) {
  check_input(model, batch);
  return backpropagate<float>(model.layers(), model.dropout_rate(), batch, labels, mode, rng);
}

GradientsD compute_gradients_double(const MlpModel& model, const Eigen::Ref<const MatrixF>& batch,
                                    std::span<const float> labels) {
  check_input(model, batch);
  return backpropagate<double>(layers_as<double>(model), 0.0f, batch.cast<double>(), labels, Mode::kEval, nullptr);
}

AdamState AdamState::for_model(const MlpModel& model) {
  AdamState state;
  for (const auto& layer : model.layers()) {
    state.first_moment.push_back(
        DenseLayer{MatrixF::Zero(layer.weight.rows(), layer.weight.cols()), VectorF::Zero(layer.bias.size())});
    state.second_moment.push_back(
        DenseLayer{MatrixF::Zero(layer.weight.rows(), layer.weight.cols()), VectorF::Zero(layer.bias.size())});
  }
  return state;
}

void adam_update(MlpModel& model, const Gradients& grads, AdamState& state, double learning_rate) {
  if (state.first_moment.size() != model.layers().size()) state = AdamState::for_model(model);
  ++state.step;
  const float b1 = static_cast<float>(state.beta1);
  const float b2 = static_cast<float>(state.beta2);
  const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  const float step_size = static_cast<float>(learning_rate / correction1);
  const float root_c2 = static_cast<float>(std::sqrt(correction2));
  const float eps = static_cast<float>(state.epsilon);

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m.array() = b1 * m.array() + (1.0f - b1) * grad.array();
    v.array() = b2 * v.array() + (1.0f - b2) * grad.array().square();
    param.array() -= step_size * m.array() / (v.array().sqrt() / root_c2 + eps);
  };
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    auto& layer = model.layers()[l];
    update(layer.weight, grads.layers[l].weight, state.first_moment[l].weight, state.second_moment[l].weight);
    update(layer.bias, grads.layers[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
  }
}

double backward_and_step(MlpModel& model, const Eigen::Ref<const MatrixF>& batch, std::span<const float> labels,
                         AdamState& state, double learning_rate, Rng& rng) {
  const Gradients grads = compute_gradients(model, batch, labels, Mode::kTrain, &rng);
  adam_update(model, grads, state, learning_rate);
  return grads.loss;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidInput("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidInput("learning rate must be positive");
  if (lr_step_epochs < 1) throw InvalidInput("lr step must be >= 1 epoch");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidInput("lr decay must lie in (0, 1]");
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (target_positive_fraction && !(*target_positive_fraction > 0.0 && *target_positive_fraction < 1.0)) {
    throw InvalidInput("target positive fraction must lie in (0, 1)");
  }
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) throw InvalidInput("dropout must lie in [0, 1)");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw InvalidInput("validation fraction must lie in [0, 1)");
  }
  if (!features.any()) throw InvalidInput("feature subset selects no features");
  for (int h : hidden) {
    if (h < 1) throw InvalidInput("hidden sizes must be >= 1");
  }
}

double TrainConfig::learning_rate_for_epoch(int epoch) const {
  return learning_rate * std::pow(lr_decay, (epoch - 1) / lr_step_epochs);
}

TrainResult train(std::span<const PatchGraph> graphs, const TrainConfig& config, const ValidationFn& validator) {
  config.validate();
  PairSampler sampler(graphs, config.features);
  if (sampler.positive_pool() == 0 || sampler.negative_pool() == 0) {
    throw InvalidInput("training corpus needs at least one positive and one negative edge");
  }
  std::vector<int> dims;
  dims.push_back(sampler.pair_dim());
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(1);

  TrainResult result;
  MlpModel model = MlpModel::initialized(dims, config.dropout_rate, mix_seed(config.seed, 1));
  AdamState adam = AdamState::for_model(model);
  Rng rng(mix_seed(config.seed, 2));

  const int batch = config.batch_size;
  const int steps = std::max<int>(1, static_cast<int>(sampler.edge_count() / batch));
  MatrixF features(batch, sampler.pair_dim());
  std::vector<float> labels(batch);
  double best_score = -1.0;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = config.learning_rate_for_epoch(epoch);
    double loss_sum = 0.0;
    for (int s = 0; s < steps; ++s) {
      std::span<float> out(features.data(), static_cast<std::size_t>(features.size()));
      if (config.target_positive_fraction) {
        sampler.sample_batch(*config.target_positive_fraction, batch, rng, out, labels);
      } else {
        sampler.sample_natural_batch(batch, rng, out, labels);
      }
      const double loss = backward_and_step(model, features, labels, adam, lr, rng);
      if (!std::isfinite(loss)) {
        throw Error("training diverged: loss is not finite at epoch " + std::to_string(epoch) + ", step " +
                    std::to_string(s + 1));
      }
      loss_sum += loss;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.steps = steps;
    entry.mean_loss = loss_sum / steps;
    entry.learning_rate = lr;
    if (validator) {
      entry.validation_f = validator(model);
      if (*entry.validation_f > best_score) {
        best_score = *entry.validation_f;
        result.model = model;
        result.best_epoch = epoch;
      }
    } else {
      result.model = model;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
  }
  return result;
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

constexpr std::uint32_t kMaxLayerWidth = 1u << 20;
constexpr std::uint32_t kMaxLayers = 64;

}  // namespace

std::vector<std::uint8_t> save_checkpoint(const MlpModel& model) {
  model.validate();
  std::vector<std::uint8_t> out;
  out.reserve(24 + 4 * model.parameter_count());
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.layer_count()));
  for (int d : model.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  put_u32(out, std::bit_cast<std::uint32_t>(model.dropout_rate()));
  for (const auto& layer : model.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(layer.weight.data()[i]));
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(layer.bias[i]));
  }
  put_u32(out, crc32(out));
  return out;
}

MlpModel load_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20) throw Error("checkpoint truncated: checksum mismatch");
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) throw Error("checkpoint has bad magic");
  if (crc32(bytes.first(bytes.size() - 4)) != get_u32(bytes, bytes.size() - 4)) {
    throw Error("checkpoint checksum mismatch");
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t n_layers = get_u32(bytes, 8);
  if (n_layers == 0 || n_layers > kMaxLayers) throw Error("checkpoint layer count out of range");
  std::size_t offset = 12;
  if (bytes.size() < offset + 4ULL * (n_layers + 1) + 8) throw Error("checkpoint truncated");
  std::vector<int> dims;
  std::uint64_t params = 0;
  for (std::uint32_t i = 0; i <= n_layers; ++i) {
    const std::uint32_t d = get_u32(bytes, offset);
    offset += 4;
    if (d == 0 || d > kMaxLayerWidth) throw Error("checkpoint dimension overflow");
    dims.push_back(static_cast<int>(d));
  }
  for (std::uint32_t l = 0; l < n_layers; ++l) params += static_cast<std::uint64_t>(dims[l]) * dims[l + 1] + dims[l + 1];
  const float dropout = std::bit_cast<float>(get_u32(bytes, offset));
  offset += 4;
  if (offset + 4 * params + 4 != bytes.size()) throw Error("checkpoint size does not match its dimensions");

  MlpModel model(dims, dropout);
  for (auto& layer : model.layers()) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
    }
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) {
      layer.bias[i] = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
    }
  }
  model.validate();
  return model;
}

}  // namespace supergbd
