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

#include "supergbd/patch_graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "supergbd/error.hpp"

namespace supergbd {

int write_patch_features(const PatchFeatures& patch, const FeatureSubset& subset, float* out) {
  int n = 0;
  if (subset.rgb) {
    for (float v : patch.rgb) out[n++] = v;
  }
  if (subset.xyz) {
    out[n++] = patch.centroid_xy[0];
    out[n++] = patch.centroid_xy[1];
    out[n++] = patch.z;
  }
  if (subset.normals) {
    for (float v : patch.normal) out[n++] = v;
  }
  if (subset.implicit) {
    for (float v : patch.implicit) out[n++] = v;
  }
  return n;
}

std::size_t PatchGraph::positive_edges() const {
  return static_cast<std::size_t>(std::count_if(edges.begin(), edges.end(), [](const GraphEdge& e) {
    return e.gt == EdgeLabel::kPositive;
  }));
}

double PatchGraph::positive_fraction() const {
  std::size_t labeled_edges = 0;
  for (const auto& e : edges) labeled_edges += e.gt.has_value();
  return labeled_edges == 0 ? 0.0 : static_cast<double>(positive_edges()) / labeled_edges;
}

Image<double> depth_gradients(const Image<float>& depth, const Mask& valid) {
  if (!valid.same_size(depth)) throw InvalidInput("depth_gradients: mask size mismatch");
  const int h = depth.rows();
  const int w = depth.cols();
  Image<double> grad(h, w, 2, 0.0);
  auto ok = [&](int r, int c) { return depth.in_bounds(r, c) && valid(r, c) != 0; };

  // Difference along one axis at (r, c); (dr, dc) is the unit step.
  auto diff = [&](int r, int c, int dr, int dc) -> double {
    const bool fwd = ok(r + dr, c + dc);
    const bool bwd = ok(r - dr, c - dc);
    const double here = depth(r, c);
    if (fwd && bwd) return (depth(r + dr, c + dc) - static_cast<double>(depth(r - dr, c - dc))) / 2.0;
    if (fwd) return depth(r + dr, c + dc) - here;
    if (bwd) return here - depth(r - dr, c - dc);
    return 0.0;
  };

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!valid(r, c)) continue;
      // Per-pixel differences scaled to derivatives w.r.t. normalized coordinates.
      grad(r, c, 0) = diff(r, c, 0, 1) * w;
      grad(r, c, 1) = diff(r, c, 1, 0) * h;
    }
  }
  return grad;
}

Image<float> compute_normals(const Image<float>& depth, const Mask& valid) {
  const Image<double> grad = depth_gradients(depth, valid);
  Image<float> normals(depth.rows(), depth.cols(), 3);
  for (int r = 0; r < depth.rows(); ++r) {
    for (int c = 0; c < depth.cols(); ++c) {
      const double nx = -grad(r, c, 0);
      const double ny = -grad(r, c, 1);
      const double norm = std::sqrt(nx * nx + ny * ny + 1.0);
      normals(r, c, 0) = static_cast<float>(nx / norm);
      normals(r, c, 1) = static_cast<float>(ny / norm);
      normals(r, c, 2) = static_cast<float>(1.0 / norm);
    }
  }
  return normals;
}

std::vector<PatchFeatures> extract_features(const RgbdFrame& frame, const SuperpixelMap& map,
                                            const ImplicitFeatures* sidecar) {
  return extract_features(frame, map, compute_normals(frame.depth, frame.valid), sidecar);
}

std::vector<PatchFeatures> extract_features(const RgbdFrame& frame, const SuperpixelMap& map,
                                            const Image<float>& normals, const ImplicitFeatures* sidecar) {
  const int h = frame.rows();
  const int w = frame.cols();
  if (!map.labels.same_size(frame.depth)) throw InvalidInput("extract_features: map/frame dimension mismatch");
  if (!normals.same_size(frame.depth) || normals.channels() != 3) {
    throw InvalidInput("extract_features: normal map dimension mismatch");
  }
  const int n = map.patch_count;
  if (sidecar != nullptr) {
    if (sidecar->patch_count() != static_cast<std::size_t>(n)) {
      throw InvalidInput("sidecar covers " + std::to_string(sidecar->patch_count()) + " patches, map has " +
                         std::to_string(n));
    }
    for (std::size_t i = 0; i < sidecar->rows.size(); ++i) {
      if (sidecar->rows[i].size() != sidecar->dim) {
        throw InvalidInput("sidecar row " + std::to_string(i) + " has inconsistent dimension");
      }
    }
  }

  std::vector<std::array<double, 3>> colour(n, {0.0, 0.0, 0.0});
  std::vector<double> best_dist(n, std::numeric_limits<double>::infinity());
  std::vector<int> best_pixel(n, -1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int id = map.labels(r, c);
      for (int ch = 0; ch < 3; ++ch) colour[id][ch] += frame.rgb(r, c, ch);
      if (!frame.valid(r, c)) continue;
      const PatchInfo& p = map.patches[id];
      const double d = (r - p.centroid_row) * (r - p.centroid_row) + (c - p.centroid_col) * (c - p.centroid_col);
      if (d < best_dist[id]) {
        best_dist[id] = d;
        best_pixel[id] = r * w + c;
      }
    }
  }

  std::vector<PatchFeatures> features(n);
  for (int id = 0; id < n; ++id) {
    const PatchInfo& p = map.patches[id];
    PatchFeatures& f = features[id];
    for (int ch = 0; ch < 3; ++ch) f.rgb[ch] = static_cast<float>(colour[id][ch] / static_cast<double>(p.area));
    f.centroid_xy[0] = static_cast<float>((p.centroid_col + 0.5) / w);
    f.centroid_xy[1] = static_cast<float>((p.centroid_row + 0.5) / h);
    if (best_pixel[id] < 0) {
      f.depth_missing = true;
      f.z = 0.0f;
      f.normal = {0.0f, 0.0f, 1.0f};
    } else {
      const int r = best_pixel[id] / w;
      const int c = best_pixel[id] % w;
      f.z = frame.depth(r, c);
      f.normal = {normals(r, c, 0), normals(r, c, 1), normals(r, c, 2)};
    }
    if (sidecar != nullptr) f.implicit = sidecar->rows[id];
  }
  return features;
}

std::vector<std::pair<int, int>> adjacent_pairs(const LabelMap& labels) {
  std::vector<std::pair<int, int>> pairs;
  const int h = labels.rows();
  const int w = labels.cols();
  auto add = [&](int a, int b) {
    if (a != b) pairs.emplace_back(std::min(a, b), std::max(a, b));
  };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (c + 1 < w) add(labels(r, c), labels(r, c + 1));
      if (r + 1 < h) add(labels(r, c), labels(r + 1, c));
    }
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

PatchGraph build_graph(const SuperpixelMap& map, std::vector<PatchFeatures> features) {
  if (features.size() != static_cast<std::size_t>(map.patch_count)) {
    throw InvalidInput("build_graph: " + std::to_string(features.size()) + " feature rows for " +
                       std::to_string(map.patch_count) + " patches");
  }
  const std::size_t m = features.empty() ? 0 : features.front().implicit.size();
  for (const auto& f : features) {
    if (f.implicit.size() != m) throw InvalidInput("build_graph: implicit feature length differs across patches");
  }
  PatchGraph graph;
  graph.patches = std::move(features);
  for (const auto& [a, b] : adjacent_pairs(map.labels)) {
    graph.edges.push_back(GraphEdge{a, b, std::nullopt, std::nullopt});
  }
  return graph;
}

std::vector<int> majority_instance(const SuperpixelMap& map, const LabelMap& instance_gt) {
  if (!instance_gt.same_size(map.labels)) throw InvalidInput("label_edges_from_gt: instance map size mismatch");
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs(map.labels.pixel_count());
  for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i] = {map.labels[i], instance_gt[i]};
  std::sort(pairs.begin(), pairs.end());
  std::vector<int> majority(map.patch_count, 0);
  std::vector<long> best(map.patch_count, -1);
  for (std::size_t i = 0; i < pairs.size();) {
    std::size_t j = i;
    while (j < pairs.size() && pairs[j] == pairs[i]) ++j;
    const auto [patch, id] = pairs[i];
    const long count = static_cast<long>(j - i);
    // Ids arrive in ascending order, so strict '>' keeps the smaller id on ties.
    if (count > best[patch]) {
      best[patch] = count;
      majority[patch] = id;
    }
    i = j;
  }
  return majority;
}

PatchGraph label_edges_from_gt(PatchGraph graph, const SuperpixelMap& map, const LabelMap& instance_gt) {
  if (graph.patch_count() != static_cast<std::size_t>(map.patch_count)) {
    throw InvalidInput("label_edges_from_gt: graph/map patch count mismatch");
  }
  graph.gt_instance = majority_instance(map, instance_gt);
  for (auto& e : graph.edges) {
    e.gt = graph.gt_instance[e.a] == graph.gt_instance[e.b] ? EdgeLabel::kPositive : EdgeLabel::kNegative;
  }
  return graph;
}

double corpus_positive_fraction(std::span<const PatchGraph> graphs) {
  std::size_t pos = 0, total = 0;
  for (const auto& g : graphs) {
    for (const auto& e : g.edges) {
      if (!e.gt) continue;
      ++total;
      pos += *e.gt == EdgeLabel::kPositive;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(pos) / total;
}

PairSampler::PairSampler(std::span<const PatchGraph> graphs, FeatureSubset subset)
    : graphs_(graphs), subset_(subset) {
  if (!subset.any()) throw InvalidInput("feature subset selects no features");
  int m = -1;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (graphs[g].patches.empty()) continue;
    if (m < 0) m = graphs[g].implicit_dim();
    if (graphs[g].implicit_dim() != m) throw InvalidInput("implicit feature dimension differs across graphs");
    for (std::size_t e = 0; e < graphs[g].edges.size(); ++e) {
      const auto& gt = graphs[g].edges[e].gt;
      if (!gt) continue;
      EdgeRef ref{static_cast<std::uint32_t>(g), static_cast<std::uint32_t>(e)};
      (*gt == EdgeLabel::kPositive ? positives_ : negatives_).push_back(ref);
    }
  }
  if (subset.implicit && m <= 0) throw InvalidInput("implicit features requested but graphs carry none");
  patch_dim_ = subset.patch_dim(std::max(m, 0));
  pair_dim_ = 2 * patch_dim_;
}

double PairSampler::natural_positive_fraction() const {
  return edge_count() == 0 ? 0.0 : static_cast<double>(positives_.size()) / edge_count();
}

void PairSampler::write_pair(std::size_t graph_index, std::size_t edge_index, bool swap, float* out) const {
  const PatchGraph& g = graphs_[graph_index];
  const GraphEdge& e = g.edges[edge_index];
  const int first = swap ? e.b : e.a;
  const int second = swap ? e.a : e.b;
  write_patch_features(g.patches[first], subset_, out);
  write_patch_features(g.patches[second], subset_, out + patch_dim_);
}

void PairSampler::emit(const EdgeRef& ref, Rng& rng, float* row) const {
  write_pair(ref.graph, ref.edge, rng.bernoulli(0.5), row);
}

void PairSampler::sample_batch(double target_positive_fraction, int batch_size, Rng& rng, std::span<float> features,
                               std::span<float> labels) const {
  if (!(target_positive_fraction > 0.0 && target_positive_fraction < 1.0)) {
    throw InvalidInput("target positive fraction must lie in (0, 1)");
  }
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (positives_.empty()) throw InvalidInput("no positive edges to sample from");
  if (negatives_.empty()) throw InvalidInput("no negative edges to sample from");
  if (features.size() != static_cast<std::size_t>(batch_size) * pair_dim_ || labels.size() != static_cast<std::size_t>(batch_size)) {
    throw InvalidInput("sample_batch: output buffer size mismatch");
  }
  const int n_pos = static_cast<int>(std::floor(batch_size * target_positive_fraction));
  for (int i = 0; i < batch_size; ++i) {
    const bool positive = i < n_pos;
    const auto& pool = positive ? positives_ : negatives_;
    const auto& ref = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
    emit(ref, rng, features.data() + static_cast<std::size_t>(i) * pair_dim_);
    labels[i] = positive ? 1.0f : 0.0f;
  }
}

void PairSampler::sample_natural_batch(int batch_size, Rng& rng, std::span<float> features,
                                       std::span<float> labels) const {
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (edge_count() == 0) throw InvalidInput("no labeled edges to sample from");
  if (features.size() != static_cast<std::size_t>(batch_size) * pair_dim_ || labels.size() != static_cast<std::size_t>(batch_size)) {
    throw InvalidInput("sample_natural_batch: output buffer size mismatch");
  }
  const auto total = static_cast<std::int64_t>(edge_count());
  for (int i = 0; i < batch_size; ++i) {
    const auto k = static_cast<std::size_t>(rng.uniform_int(0, total - 1));
    const bool positive = k < positives_.size();
    const EdgeRef& ref = positive ? positives_[k] : negatives_[k - positives_.size()];
    emit(ref, rng, features.data() + static_cast<std::size_t>(i) * pair_dim_);
    labels[i] = positive ? 1.0f : 0.0f;
  }
}

std::vector<EdgeSample> sample_pairs(std::span<const PatchGraph> graphs, double target_positive_fraction,
                                     int batch_size, int batch_count, const FeatureSubset& subset, Rng& rng) {
  PairSampler sampler(graphs, subset);
  std::vector<EdgeSample> samples;
  std::vector<float> features(static_cast<std::size_t>(batch_size) * sampler.pair_dim());
  std::vector<float> labels(batch_size);
  for (int b = 0; b < batch_count; ++b) {
    sampler.sample_batch(target_positive_fraction, batch_size, rng, features, labels);
    for (int i = 0; i < batch_size; ++i) {
      EdgeSample s;
      s.features.assign(features.begin() + static_cast<std::ptrdiff_t>(i) * sampler.pair_dim(),
                        features.begin() + static_cast<std::ptrdiff_t>(i + 1) * sampler.pair_dim());
      s.label = static_cast<int>(labels[i]);
      samples.push_back(std::move(s));
    }
  }
  return samples;
}

}  // namespace supergbd
