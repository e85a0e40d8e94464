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

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "supergbd/imagery.hpp"
#include "supergbd/metrics.hpp"
#include "supergbd/patch_graph.hpp"
#include "supergbd/sidecar.hpp"
#include "supergbd/superpixel.hpp"
#include "supergbd/tinynet.hpp"

namespace supergbd {

struct PipelineConfig {
  SlicConfig slic;
  FeatureSubset features;
  double threshold = 0.5;  // edges with probability >= threshold are merged
  std::filesystem::path checkpoint;
  bool use_sidecar = false;
  // Drops the largest predicted segment (normally the supporting table).
  bool suppress_largest = false;

  void validate() const;
};

struct Preprocessed {
  std::string frame_id;
  SuperpixelMap rgb_map;
  SuperpixelMap depth_map;
  SuperpixelMap map;
  PatchGraph graph;  // edge labels filled when the frame has ground truth
  std::optional<LabelMap> instance_gt;
  std::optional<std::map<int, std::string>> class_of_instance;
};

Preprocessed preprocess(const RgbdFrame& frame, const PipelineConfig& config,
                        const ImplicitFeatures* sidecar = nullptr);

// Union-find over kept edges; component ids start at 1 and follow the
// smallest member patch id.
std::vector<int> connected_components(int patch_count, std::span<const std::pair<int, int>> kept_edges);

struct InstancePrediction {
  LabelMap instance_map;                       // 0 only where a segment was suppressed
  std::vector<int> patch_segment;              // per patch
  std::vector<std::vector<int>> segment_patches;  // segment id - 1 -> patch ids
  std::vector<float> edge_probabilities;       // aligned with graph.edges

  int segment_count() const { return static_cast<int>(segment_patches.size()); }
};

// Scores every edge as (a || b) in eval mode.
std::vector<float> score_edges(const MlpModel& model, const PatchGraph& graph, const FeatureSubset& features);

InstancePrediction predict_from_probabilities(const SuperpixelMap& map, const PatchGraph& graph,
                                              std::span<const float> probabilities, double threshold,
                                              bool suppress_largest = false);

InstancePrediction infer(const Preprocessed& data, const MlpModel& model, const PipelineConfig& config);
InstancePrediction infer(const RgbdFrame& frame, const MlpModel& model, const PipelineConfig& config,
                         const ImplicitFeatures* sidecar = nullptr);

// Writes <id>_pred.png (16-bit ids) and <id>_pred.json.
void save_prediction(const InstancePrediction& prediction, const std::filesystem::path& dir,
                     const std::string& frame_id, double threshold, const std::string& checkpoint_hash);

ImageEvaluation evaluate_prediction(const Preprocessed& data, const LabelMap& predicted);

// Pooled Overlap F (percent) of the model over labeled frames.
double overlap_f(std::span<const Preprocessed> frames, const MlpModel& model, const PipelineConfig& config);

struct CorpusTrainResult {
  TrainResult train;
  std::vector<std::string> validation_frames;
};

// Holds out validation_fraction of the frames (at least one when the corpus
// has two or more) and keeps the epoch with the best validation Overlap F.
CorpusTrainResult train_on_corpus(std::span<const Preprocessed> corpus, const TrainConfig& train_config,
                                  const PipelineConfig& config);

}  // namespace supergbd
