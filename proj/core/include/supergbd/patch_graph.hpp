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

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "supergbd/image.hpp"
#include "supergbd/imagery.hpp"
#include "supergbd/random.hpp"
#include "supergbd/sidecar.hpp"
#include "supergbd/superpixel.hpp"

namespace supergbd {

inline constexpr int kExplicitFeatureDim = 9;

// Explicit features: mean colour, normalized centroid, depth and surface
// normal at the centroid; implicit features come from a sidecar file.
struct PatchFeatures {
  std::array<float, 3> rgb{};
  std::array<float, 2> centroid_xy{};
  float z = 0.0f;
  std::array<float, 3> normal{0.0f, 0.0f, 1.0f};
  std::vector<float> implicit;
  bool depth_missing = false;  // no valid depth pixel inside the patch
};

// Which feature groups enter the merger's input vector.
struct FeatureSubset {
  bool rgb = true;
  bool xyz = true;
  bool normals = true;
  bool implicit = false;

  int patch_dim(int implicit_dim) const {
    return (rgb ? 3 : 0) + (xyz ? 3 : 0) + (normals ? 3 : 0) + (implicit ? implicit_dim : 0);
  }
  bool any() const { return rgb || xyz || normals || implicit; }
  friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;
};

// Writes the selected components of one patch; returns the number written.
int write_patch_features(const PatchFeatures& patch, const FeatureSubset& subset, float* out);

enum class EdgeLabel : std::uint8_t { kNegative = 0, kPositive = 1 };

struct GraphEdge {
  int a = 0;  // a < b
  int b = 0;
  std::optional<EdgeLabel> gt;
  std::optional<float> probability;
};

struct PatchGraph {
  std::vector<PatchFeatures> patches;
  std::vector<GraphEdge> edges;  // sorted by (a, b)
  std::vector<int> gt_instance;  // empty until labeled

  std::size_t patch_count() const { return patches.size(); }
  int implicit_dim() const { return patches.empty() ? 0 : static_cast<int>(patches.front().implicit.size()); }
  bool labeled() const { return !gt_instance.empty(); }
  std::size_t positive_edges() const;
  double positive_fraction() const;
};

struct EdgeSample {
  std::vector<float> features;  // two concatenated patch blocks
  int label = 0;
};

// Per-pixel depth gradients in normalized image units (channel 0: d/dx,
// channel 1: d/dy). Central differences inside, one-sided at borders or next
// to invalid pixels, zero where no valid difference exists.
Image<double> depth_gradients(const Image<float>& depth, const Mask& valid);

// Unit normals of (-gx, -gy, 1).
Image<float> compute_normals(const Image<float>& depth, const Mask& valid);

std::vector<PatchFeatures> extract_features(const RgbdFrame& frame, const SuperpixelMap& map,
                                            const Image<float>& normals,
                                            const ImplicitFeatures* sidecar = nullptr);
std::vector<PatchFeatures> extract_features(const RgbdFrame& frame, const SuperpixelMap& map,
                                            const ImplicitFeatures* sidecar = nullptr);

// Unordered 4-adjacent patch pairs, each exactly once.
std::vector<std::pair<int, int>> adjacent_pairs(const LabelMap& labels);

PatchGraph build_graph(const SuperpixelMap& map, std::vector<PatchFeatures> features);

// Majority instance id per patch (ties to the smaller id); an edge is
// positive when both endpoints share the id. Background 0 is a label too.
std::vector<int> majority_instance(const SuperpixelMap& map, const LabelMap& instance_gt);
PatchGraph label_edges_from_gt(PatchGraph graph, const SuperpixelMap& map, const LabelMap& instance_gt);

double corpus_positive_fraction(std::span<const PatchGraph> graphs);

// Draws rebalanced edge batches from a corpus of labeled graphs. The graphs
// must outlive the sampler.
class PairSampler {
 public:
  PairSampler(std::span<const PatchGraph> graphs, FeatureSubset subset);

  std::size_t positive_pool() const { return positives_.size(); }
  std::size_t negative_pool() const { return negatives_.size(); }
  std::size_t edge_count() const { return positives_.size() + negatives_.size(); }
  double natural_positive_fraction() const;
  int pair_dim() const { return pair_dim_; }

  // floor(batch * p) positives followed by negatives, each drawn uniformly
  // with replacement; every row has its two patch blocks swapped with
  // probability 0.5. `features` is batch x pair_dim row-major.
  void sample_batch(double target_positive_fraction, int batch_size, Rng& rng, std::span<float> features,
                    std::span<float> labels) const;

  // Uniform draw over all edges, keeping the corpus's own label ratio.
  void sample_natural_batch(int batch_size, Rng& rng, std::span<float> features, std::span<float> labels) const;

  void write_pair(std::size_t graph_index, std::size_t edge_index, bool swap, float* out) const;

 private:
  struct EdgeRef {
    std::uint32_t graph;
    std::uint32_t edge;
  };
  void emit(const EdgeRef& ref, Rng& rng, float* row) const;

  std::span<const PatchGraph> graphs_;
  FeatureSubset subset_;
  int patch_dim_ = 0;
  int pair_dim_ = 0;
  std::vector<EdgeRef> positives_;
  std::vector<EdgeRef> negatives_;
};

// Convenience wrapper returning `batch_count` batches as individual samples.
std::vector<EdgeSample> sample_pairs(std::span<const PatchGraph> graphs, double target_positive_fraction,
                                     int batch_size, int batch_count, const FeatureSubset& subset, Rng& rng);

}  // namespace supergbd
