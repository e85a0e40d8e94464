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

#include "supergbd/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/union_find.hpp"

namespace supergbd {

void PipelineConfig::validate() const {
  slic.validate();
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("merge threshold must lie in (0, 1)");
  if (!features.any()) throw InvalidInput("feature subset selects no features");
}

Preprocessed preprocess(const RgbdFrame& frame, const PipelineConfig& config, const ImplicitFeatures* sidecar) {
  config.validate();
  frame.validate();
  if (config.features.implicit && sidecar == nullptr) {
    throw InvalidInput("frame '" + frame.frame_id + "': implicit features requested but no sidecar was given");
  }
  Preprocessed out;
  out.frame_id = frame.frame_id;
  out.rgb_map = slic_rgb(frame, config.slic);
  out.depth_map = slic_depth(frame, config.slic);
  out.map = combine_maps(out.rgb_map, out.depth_map, config.slic.min_patch_area);
  const Image<float> normals = compute_normals(frame.depth, frame.valid);
  const ImplicitFeatures* implicit = (config.features.implicit || config.use_sidecar) ? sidecar : nullptr;
  out.graph = build_graph(out.map, extract_features(frame, out.map, normals, implicit));
  if (frame.instance_gt) {
    out.graph = label_edges_from_gt(std::move(out.graph), out.map, *frame.instance_gt);
    out.instance_gt = frame.instance_gt;
    out.class_of_instance = frame.class_of_instance;
  }
  return out;
}

std::vector<int> connected_components(int patch_count, std::span<const std::pair<int, int>> kept_edges) {
  if (patch_count < 0) throw InvalidInput("patch count must be >= 0");
  DisjointSet sets(static_cast<std::size_t>(patch_count));
  for (const auto& [a, b] : kept_edges) {
    if (a < 0 || b < 0 || a >= patch_count || b >= patch_count) {
      throw InvalidInput("edge (" + std::to_string(a) + ", " + std::to_string(b) + ") references a patch outside [0, " +
                         std::to_string(patch_count) + ")");
    }
    sets.join(static_cast<std::size_t>(a), static_cast<std::size_t>(b));
  }
  std::vector<int> root_id(static_cast<std::size_t>(patch_count), 0);
  std::vector<int> component(static_cast<std::size_t>(patch_count));
  int next = 0;
  for (int p = 0; p < patch_count; ++p) {
    int& id = root_id[sets.find(static_cast<std::size_t>(p))];
    if (id == 0) id = ++next;
    component[p] = id;
  }
  return component;
}

std::vector<float> score_edges(const MlpModel& model, const PatchGraph& graph, const FeatureSubset& features) {
  const int patch_dim = features.patch_dim(graph.implicit_dim());
  if (model.input_dim() != 2 * patch_dim) {
    throw InvalidInput("checkpoint expects " + std::to_string(model.input_dim()) + " inputs but the feature flags give " +
                       std::to_string(2 * patch_dim));
  }
  std::vector<float> probabilities;
  probabilities.reserve(graph.edges.size());
  constexpr std::size_t kChunk = 2048;
  MatrixF batch;
  for (std::size_t start = 0; start < graph.edges.size(); start += kChunk) {
    const std::size_t count = std::min(kChunk, graph.edges.size() - start);
    batch.resize(static_cast<Eigen::Index>(count), 2 * patch_dim);
    for (std::size_t i = 0; i < count; ++i) {
      const GraphEdge& e = graph.edges[start + i];
      float* row = batch.row(static_cast<Eigen::Index>(i)).data();
      const int n = write_patch_features(graph.patches[e.a], features, row);
      write_patch_features(graph.patches[e.b], features, row + n);
    }
    const std::vector<float> p = forward(model, batch, Mode::kEval);
    probabilities.insert(probabilities.end(), p.begin(), p.end());
  }
  return probabilities;
}

InstancePrediction predict_from_probabilities(const SuperpixelMap& map, const PatchGraph& graph,
                                              std::span<const float> probabilities, double threshold,
                                              bool suppress_largest) {
  if (probabilities.size() != graph.edges.size()) {
    throw InvalidInput("got " + std::to_string(probabilities.size()) + " edge probabilities for " +
                       std::to_string(graph.edges.size()) + " edges");
  }
  if (graph.patch_count() != static_cast<std::size_t>(map.patch_count)) {
    throw InvalidInput("graph and superpixel map disagree on the patch count");
  }
  std::vector<std::pair<int, int>> kept;
  for (std::size_t i = 0; i < graph.edges.size(); ++i) {
    if (probabilities[i] >= threshold) kept.emplace_back(graph.edges[i].a, graph.edges[i].b);
  }
  InstancePrediction out;
  out.patch_segment = connected_components(map.patch_count, kept);
  out.edge_probabilities.assign(probabilities.begin(), probabilities.end());

  const int segments = out.patch_segment.empty()
                           ? 0
                           : *std::max_element(out.patch_segment.begin(), out.patch_segment.end());
  if (suppress_largest && segments > 0) {
    std::vector<long> area(static_cast<std::size_t>(segments) + 1, 0);
    for (int p = 0; p < map.patch_count; ++p) area[out.patch_segment[p]] += map.patches[p].area;
    const int largest = static_cast<int>(std::max_element(area.begin() + 1, area.end()) - area.begin());
    for (int& s : out.patch_segment) {
      if (s == largest) {
        s = 0;
      } else if (s > largest) {
        --s;
      }
    }
  }
  const int kept_segments = suppress_largest && segments > 0 ? segments - 1 : segments;
  out.segment_patches.resize(static_cast<std::size_t>(kept_segments));
  for (int p = 0; p < map.patch_count; ++p) {
    if (out.patch_segment[p] > 0) out.segment_patches[out.patch_segment[p] - 1].push_back(p);
  }
  out.instance_map = LabelMap(map.rows(), map.cols());
  for (std::size_t i = 0; i < out.instance_map.pixel_count(); ++i) {
    out.instance_map[i] = out.patch_segment[map.labels[i]];
  }
  return out;
}

InstancePrediction infer(const Preprocessed& data, const MlpModel& model, const PipelineConfig& config) {
  const std::vector<float> p = score_edges(model, data.graph, config.features);
  return predict_from_probabilities(data.map, data.graph, p, config.threshold, config.suppress_largest);
}

InstancePrediction infer(const RgbdFrame& frame, const MlpModel& model, const PipelineConfig& config,
                         const ImplicitFeatures* sidecar) {
  const int implicit_dim = config.features.implicit && sidecar != nullptr ? static_cast<int>(sidecar->dim) : 0;
  if (model.input_dim() != 2 * config.features.patch_dim(implicit_dim)) {
    throw InvalidInput("checkpoint input width " + std::to_string(model.input_dim()) +
                       " does not match the configured feature flags");
  }
  return infer(preprocess(frame, config, sidecar), model, config);
}

void save_prediction(const InstancePrediction& prediction, const std::filesystem::path& dir,
                     const std::string& frame_id, double threshold, const std::string& checkpoint_hash) {
  std::filesystem::create_directories(dir);
  save_label_png(prediction.instance_map, dir / (frame_id + "_pred.png"));
  nlohmann::json j;
  j["frame_id"] = frame_id;
  j["threshold"] = threshold;
  j["checkpoint_crc32"] = checkpoint_hash;
  j["segment_count"] = prediction.segment_count();
  nlohmann::json counts = nlohmann::json::array();
  for (const auto& patches : prediction.segment_patches) counts.push_back(patches.size());
  j["segment_patch_counts"] = std::move(counts);
  const auto path = dir / (frame_id + "_pred.json");
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error("cannot write " + path.string());
}

ImageEvaluation evaluate_prediction(const Preprocessed& data, const LabelMap& predicted) {
  if (!data.instance_gt) throw InvalidInput("frame '" + data.frame_id + "' has no instance ground truth");
  const std::map<int, std::string>* classes = data.class_of_instance ? &*data.class_of_instance : nullptr;
  return evaluate_image(predicted, *data.instance_gt, classes, default_boundary_radius(predicted.rows()),
                        data.frame_id);
}

double overlap_f(std::span<const Preprocessed> frames, const MlpModel& model, const PipelineConfig& config) {
  std::vector<ImageEvaluation> evals;
  evals.reserve(frames.size());
  for (const auto& data : frames) {
    const InstancePrediction pred = infer(data, model, config);
    evals.push_back(evaluate_prediction(data, pred.instance_map));
  }
  return pooled_scores(evals).overlap.f;
}

CorpusTrainResult train_on_corpus(std::span<const Preprocessed> corpus, const TrainConfig& train_config,
                                  const PipelineConfig& config) {
  train_config.validate();
  config.validate();
  if (!(train_config.features == config.features)) {
    throw InvalidInput("training and pipeline feature flags differ");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t n_val = 0;
  if (train_config.validation_fraction > 0.0 && corpus.size() >= 2) {
    n_val = static_cast<std::size_t>(std::lround(train_config.validation_fraction * corpus.size()));
    n_val = std::clamp<std::size_t>(n_val, 1, corpus.size() - 1);
    Rng rng(mix_seed(train_config.seed, 3));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
  }
  std::vector<Preprocessed> validation;
  std::vector<PatchGraph> graphs;
  CorpusTrainResult result;
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(val_idx.begin(), val_idx.end());
  for (std::size_t i : val_idx) {
    validation.push_back(corpus[i]);
    result.validation_frames.push_back(corpus[i].frame_id);
  }
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(train_idx.begin(), train_idx.end());
  for (std::size_t i : train_idx) {
    if (!corpus[i].graph.labeled()) throw InvalidInput("frame '" + corpus[i].frame_id + "' has no edge labels");
    graphs.push_back(corpus[i].graph);
  }
  ValidationFn validator;
  if (!validation.empty()) {
    validator = [&](const MlpModel& model) { return overlap_f(validation, model, config); };
  }
  result.train = train(graphs, train_config, validator);
  return result;
}

}  // namespace supergbd
