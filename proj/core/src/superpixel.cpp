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

#include "supergbd/superpixel.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/union_find.hpp"

namespace supergbd {

namespace fs = std::filesystem;

void SlicConfig::validate() const {
  if (algorithm != "slic") throw InvalidInput("superpixel algorithm '" + algorithm + "' is not implemented");
  if (target_patch_count < 1) throw InvalidInput("target_patch_count must be >= 1");
  if (iterations < 1) throw InvalidInput("iterations must be >= 1");
  if (min_patch_area < 1) throw InvalidInput("min_patch_area must be >= 1");
  if (!(compactness >= 0.0) || !std::isfinite(compactness)) throw InvalidInput("compactness must be finite and >= 0");
  if (!(depth_scale > 0.0) || !std::isfinite(depth_scale)) throw InvalidInput("depth_scale must be positive");
}

SuperpixelMap make_superpixel_map(LabelMap labels) {
  SuperpixelMap map;
  int max_id = -1;
  for (std::int32_t id : labels.data()) {
    if (id < 0) throw InvalidInput("negative patch id");
    max_id = std::max(max_id, id);
  }
  map.patch_count = max_id + 1;
  map.patches.assign(map.patch_count, PatchInfo{});
  for (auto& p : map.patches) {
    p.min_row = std::numeric_limits<int>::max();
    p.min_col = std::numeric_limits<int>::max();
    p.max_row = -1;
    p.max_col = -1;
  }
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      PatchInfo& p = map.patches[labels(r, c)];
      ++p.area;
      p.centroid_row += r;
      p.centroid_col += c;
      p.min_row = std::min(p.min_row, r);
      p.min_col = std::min(p.min_col, c);
      p.max_row = std::max(p.max_row, r);
      p.max_col = std::max(p.max_col, c);
    }
  }
  for (int i = 0; i < map.patch_count; ++i) {
    PatchInfo& p = map.patches[i];
    if (p.area == 0) throw InvalidInput("patch ids are not contiguous (id " + std::to_string(i) + " unused)");
    p.centroid_row /= static_cast<double>(p.area);
    p.centroid_col /= static_cast<double>(p.area);
  }
  map.labels = std::move(labels);
  return map;
}

LabelMap split_connected(const LabelMap& labels, int* component_count) {
  const int h = labels.rows();
  const int w = labels.cols();
  LabelMap out(h, w, 1, -1);
  int next = 0;
  std::vector<int> stack;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (out(r0, c0) >= 0) continue;
      const std::int32_t source = labels(r0, c0);
      out(r0, c0) = next;
      stack.assign(1, r0 * w + c0);
      while (!stack.empty()) {
        const int idx = stack.back();
        stack.pop_back();
        const int r = idx / w;
        const int c = idx % w;
        constexpr int dr[4] = {-1, 1, 0, 0};
        constexpr int dc[4] = {0, 0, -1, 1};
        for (int k = 0; k < 4; ++k) {
          const int rr = r + dr[k];
          const int cc = c + dc[k];
          if (!labels.in_bounds(rr, cc) || out(rr, cc) >= 0 || labels(rr, cc) != source) continue;
          out(rr, cc) = next;
          stack.push_back(rr * w + cc);
        }
      }
      ++next;
    }
  }
  if (component_count != nullptr) *component_count = next;
  return out;
}

LabelMap relabel_contiguous(const LabelMap& labels, int* count) {
  LabelMap out(labels.rows(), labels.cols());
  std::unordered_map<std::int32_t, std::int32_t> remap;
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) {
    auto [it, inserted] = remap.try_emplace(labels[i], static_cast<std::int32_t>(remap.size()));
    out[i] = it->second;
  }
  if (count != nullptr) *count = static_cast<int>(remap.size());
  return out;
}

int absorb_small_patches(LabelMap& labels, int min_area) {
  int n = 0;
  for (std::int32_t id : labels.data()) n = std::max(n, id + 1);
  if (n <= 1 || min_area <= 1) {
    labels = relabel_contiguous(labels);
    return 0;
  }
  std::vector<long> area(n, 0);
  for (std::int32_t id : labels.data()) ++area[id];

  std::vector<std::vector<int>> neighbours(n);
  const int h = labels.rows();
  const int w = labels.cols();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int a = labels(r, c);
      if (c + 1 < w && labels(r, c + 1) != a) {
        neighbours[a].push_back(labels(r, c + 1));
        neighbours[labels(r, c + 1)].push_back(a);
      }
      if (r + 1 < h && labels(r + 1, c) != a) {
        neighbours[a].push_back(labels(r + 1, c));
        neighbours[labels(r + 1, c)].push_back(a);
      }
    }
  }
  for (auto& list : neighbours) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }

  // Parent pointers always point at the absorbing patch, so find() yields
  // the surviving patch id.
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  using Entry = std::pair<long, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  for (int i = 0; i < n; ++i) {
    if (area[i] < min_area) queue.emplace(area[i], i);
  }
  int merged = 0;
  while (!queue.empty()) {
    const auto [a, p] = queue.top();
    queue.pop();
    if (find(p) != p || area[p] != a || area[p] >= min_area) continue;
    int target = -1;
    for (int q : neighbours[p]) {
      const int root = find(q);
      if (root == p) continue;
      if (target < 0 || area[root] > area[target] || (area[root] == area[target] && root < target)) target = root;
    }
    if (target < 0) continue;
    parent[p] = target;
    area[target] += area[p];
    for (int q : neighbours[p]) neighbours[target].push_back(q);
    neighbours[p].clear();
    neighbours[p].shrink_to_fit();
    // Keep the neighbour list bounded by collapsing to current roots.
    auto& list = neighbours[target];
    for (int& q : list) q = find(q);
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    list.erase(std::remove(list.begin(), list.end(), target), list.end());
    ++merged;
    if (area[target] < min_area) queue.emplace(area[target], target);
  }
  for (auto& id : labels.data()) id = find(id);
  labels = relabel_contiguous(labels);
  return merged;
}

namespace {

double sq(double x) { return x * x; }

struct Center {
  std::vector<double> feature;
  double row = 0.0;
  double col = 0.0;
};

double gradient_at(const Image<float>& img, int r, int c) {
  const int h = img.rows();
  const int w = img.cols();
  const int r0 = std::max(r - 1, 0), r1 = std::min(r + 1, h - 1);
  const int c0 = std::max(c - 1, 0), c1 = std::min(c + 1, w - 1);
  double g = 0.0;
  for (int ch = 0; ch < img.channels(); ++ch) {
    g += sq(img(r, c1, ch) - img(r, c0, ch)) + sq(img(r1, c, ch) - img(r0, c, ch));
  }
  return g;
}

}  // namespace

SuperpixelMap slic(const Image<float>& channels, const SlicConfig& config) {
  config.validate();
  const int h = channels.rows();
  const int w = channels.cols();
  const int nch = channels.channels();
  if (h <= 0 || w <= 0 || nch < 1) throw InvalidInput("slic: empty image");
  const long pixels = static_cast<long>(h) * w;
  if (config.target_patch_count > pixels) {
    throw InvalidInput("slic: target_patch_count " + std::to_string(config.target_patch_count) +
                       " exceeds pixel count " + std::to_string(pixels));
  }

  const int step = std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(pixels) / config.target_patch_count))));
  const int grid_rows = std::max(1, static_cast<int>(std::lround(static_cast<double>(h) / step)));
  const int grid_cols = std::max(1, static_cast<int>(std::lround(static_cast<double>(w) / step)));

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(grid_rows) * grid_cols);
  const int perturb = step >= 3 ? 1 : 0;
  for (int i = 0; i < grid_rows; ++i) {
    for (int j = 0; j < grid_cols; ++j) {
      int r = std::min(h - 1, static_cast<int>((i + 0.5) * h / grid_rows));
      int c = std::min(w - 1, static_cast<int>((j + 0.5) * w / grid_cols));
      // Move the seed to the lowest-gradient pixel of its 3x3 neighbourhood.
      // Grids finer than 3 px skip this so neighbouring seeds cannot collide.
      double best = gradient_at(channels, r, c);
      int best_r = r, best_c = c;
      for (int dr = -perturb; dr <= perturb; ++dr) {
        for (int dc = -perturb; dc <= perturb; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (!channels.in_bounds(rr, cc)) continue;
          const double g = gradient_at(channels, rr, cc);
          if (g < best) {
            best = g;
            best_r = rr;
            best_c = cc;
          }
        }
      }
      Center center;
      center.row = best_r;
      center.col = best_c;
      center.feature.resize(nch);
      for (int ch = 0; ch < nch; ++ch) center.feature[ch] = channels(best_r, best_c, ch);
      centers.push_back(std::move(center));
    }
  }

  const double spatial_weight = config.compactness / step;
  LabelMap labels(h, w, 1, -1);
  std::vector<double> distance(pixels);
  const int k_count = static_cast<int>(centers.size());
  std::vector<double> sums;

  for (int iter = 0; iter < config.iterations; ++iter) {
    std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
    for (int k = 0; k < k_count; ++k) {
      const Center& ctr = centers[k];
      const int r0 = std::max(0, static_cast<int>(std::floor(ctr.row - step)));
      const int r1 = std::min(h - 1, static_cast<int>(std::ceil(ctr.row + step)));
      const int c0 = std::max(0, static_cast<int>(std::floor(ctr.col - step)));
      const int c1 = std::min(w - 1, static_cast<int>(std::ceil(ctr.col + step)));
      for (int r = r0; r <= r1; ++r) {
        for (int c = c0; c <= c1; ++c) {
          double fd = 0.0;
          for (int ch = 0; ch < nch; ++ch) fd += sq(channels(r, c, ch) - ctr.feature[ch]);
          const double d = std::sqrt(fd) + spatial_weight * std::sqrt(sq(r - ctr.row) + sq(c - ctr.col));
          const std::size_t idx = static_cast<std::size_t>(r) * w + c;
          if (d < distance[idx]) {
            distance[idx] = d;
            labels[idx] = k;
          }
        }
      }
    }
    // Pixels no window reached (centres drifted) go to the spatially nearest centre.
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (labels(r, c) >= 0) continue;
        double best = std::numeric_limits<double>::infinity();
        for (int k = 0; k < k_count; ++k) {
          const double d = sq(r - centers[k].row) + sq(c - centers[k].col);
          if (d < best) {
            best = d;
            labels(r, c) = k;
          }
        }
      }
    }

    sums.assign(static_cast<std::size_t>(k_count) * (nch + 3), 0.0);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double* s = &sums[static_cast<std::size_t>(labels(r, c)) * (nch + 3)];
        for (int ch = 0; ch < nch; ++ch) s[ch] += channels(r, c, ch);
        s[nch] += r;
        s[nch + 1] += c;
        s[nch + 2] += 1.0;
      }
    }
    for (int k = 0; k < k_count; ++k) {
      const double* s = &sums[static_cast<std::size_t>(k) * (nch + 3)];
      if (s[nch + 2] == 0.0) continue;
      for (int ch = 0; ch < nch; ++ch) centers[k].feature[ch] = s[ch] / s[nch + 2];
      centers[k].row = s[nch] / s[nch + 2];
      centers[k].col = s[nch + 1] / s[nch + 2];
    }
  }

  // Connectivity enforcement: split stray fragments, then absorb fragments
  // below a quarter of the nominal patch area. min_patch_area applies to the
  // combined map.
  LabelMap connected = split_connected(labels);
  const int min_area = std::max(1, step * step / 4);
  SuperpixelMap map;
  const int absorbed = absorb_small_patches(connected, min_area);
  map = make_superpixel_map(std::move(connected));
  map.absorbed_count = absorbed;
  return map;
}

Image<float> rgb_to_lab(const Image<float>& rgb) {
  if (rgb.channels() != 3) throw InvalidInput("rgb_to_lab: expected 3 channels");
  Image<float> lab(rgb.rows(), rgb.cols(), 3);
  auto linearize = [](double v) {
    return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
  };
  auto f = [](double t) {
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
  };
  constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
  for (int r = 0; r < rgb.rows(); ++r) {
    for (int c = 0; c < rgb.cols(); ++c) {
      const double R = linearize(rgb(r, c, 0));
      const double G = linearize(rgb(r, c, 1));
      const double B = linearize(rgb(r, c, 2));
      const double X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B;
      const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
      const double Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B;
      const double fx = f(X / xn), fy = f(Y / yn), fz = f(Z / zn);
      lab(r, c, 0) = static_cast<float>(116.0 * fy - 16.0);
      lab(r, c, 1) = static_cast<float>(500.0 * (fx - fy));
      lab(r, c, 2) = static_cast<float>(200.0 * (fy - fz));
    }
  }
  return lab;
}

SuperpixelMap slic_rgb(const RgbdFrame& frame, const SlicConfig& config) {
  return slic(rgb_to_lab(frame.rgb), config);
}

SuperpixelMap slic_depth(const RgbdFrame& frame, const SlicConfig& config) {
  config.validate();
  Image<float> scaled(frame.depth.rows(), frame.depth.cols());
  for (std::size_t i = 0; i < scaled.pixel_count(); ++i) {
    scaled[i] = static_cast<float>(frame.depth[i] * config.depth_scale);
  }
  return slic(scaled, config);
}

std::int64_t combine_shift_width(int depth_patch_count) {
  std::int64_t shift = 1000;
  while (depth_patch_count >= shift) shift *= 10;
  return shift;
}

SuperpixelMap combine_maps_unabsorbed(const SuperpixelMap& rgb_map, const SuperpixelMap& depth_map) {
  if (!rgb_map.labels.same_size(depth_map.labels)) throw InvalidInput("combine_maps: dimension mismatch");
  const std::int64_t shift = combine_shift_width(depth_map.patch_count);
  LabelMap keyed(rgb_map.rows(), rgb_map.cols());
  std::unordered_map<std::int64_t, std::int32_t> ids;
  for (std::size_t i = 0; i < keyed.pixel_count(); ++i) {
    const std::int64_t key = combined_key(rgb_map.labels[i], depth_map.labels[i], shift);
    auto [it, inserted] = ids.try_emplace(key, static_cast<std::int32_t>(ids.size()));
    keyed[i] = it->second;
  }
  SuperpixelMap out = make_superpixel_map(split_connected(keyed));
  out.shift_width = shift;
  return out;
}

SuperpixelMap combine_maps(const SuperpixelMap& rgb_map, const SuperpixelMap& depth_map, int min_patch_area) {
  if (min_patch_area < 1) throw InvalidInput("combine_maps: min_patch_area must be >= 1");
  SuperpixelMap pieces = combine_maps_unabsorbed(rgb_map, depth_map);
  LabelMap labels = std::move(pieces.labels);
  const int absorbed = absorb_small_patches(labels, min_patch_area);
  SuperpixelMap out = make_superpixel_map(std::move(labels));
  out.shift_width = pieces.shift_width;
  out.absorbed_count = absorbed;
  return out;
}

void save_superpixel_map(const SuperpixelMap& map, const fs::path& png_path, const fs::path& json_path,
                         const SlicConfig& config) {
  save_label_png(map.labels, png_path);
  nlohmann::json j = {
      {"patch_count", map.patch_count},
      {"shift_width", map.shift_width},
      {"absorbed_count", map.absorbed_count},
      {"config",
       {{"algorithm", config.algorithm},
        {"target_patch_count", config.target_patch_count},
        {"compactness", config.compactness},
        {"iterations", config.iterations},
        {"min_patch_area", config.min_patch_area},
        {"depth_scale", config.depth_scale},
        {"seed", config.seed}}},
  };
  std::ofstream out(json_path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + json_path.string() + "'");
  out << j.dump(2) << '\n';
}

SuperpixelMap load_superpixel_map(const fs::path& png_path) {
  return make_superpixel_map(load_label_png(png_path));
}

}  // namespace supergbd
