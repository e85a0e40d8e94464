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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "supergbd/image.hpp"

namespace supergbd {

// One registered RGB-D capture with optional instance ground truth.
// Instance id 0 is background in every label map.
struct RgbdFrame {
  std::string frame_id;
  Image<float> rgb;    // H x W x 3, values in [0, 1]
  Image<float> depth;  // H x W, normalized to [0, 1]; 0 where invalid
  Mask valid;          // 1 where the sensor returned a reading
  std::optional<LabelMap> instance_gt;
  std::optional<std::map<int, std::string>> class_of_instance;

  int rows() const { return depth.rows(); }
  int cols() const { return depth.cols(); }

  // Throws InvalidInput when a shape, range or class-map invariant fails.
  void validate() const;
};

struct DepthEncoding {
  double max_depth_mm = 10000.0;
};

struct FrameEntry {
  std::string id;
  std::string split;  // "train", "test" or empty
  std::string tag;    // zero-shot eligibility written by tag_dataset
  std::filesystem::path rgb;
  std::filesystem::path depth;
  std::optional<std::filesystem::path> instances;
  std::optional<std::filesystem::path> classes;
  std::optional<std::filesystem::path> sidecar;
};

struct DatasetIndex {
  std::filesystem::path root;
  std::vector<FrameEntry> frames;
  std::vector<std::string> seen_classes;
  std::vector<std::string> unseen_classes;

  const FrameEntry& find(const std::string& frame_id) const;
  bool contains(const std::string& frame_id) const;
  std::vector<std::string> frame_ids(const std::string& split = {}) const;
};

// Paths of the files belonging to a frame under the dataset layout.
struct FramePaths {
  static std::filesystem::path rgb(const std::filesystem::path& root, const std::string& id);
  static std::filesystem::path depth(const std::filesystem::path& root, const std::string& id);
  static std::filesystem::path instances(const std::filesystem::path& root, const std::string& id);
  static std::filesystem::path classes(const std::filesystem::path& root, const std::string& id);
  static std::filesystem::path sidecar(const std::filesystem::path& root, const std::string& id);
};

// Reads manifest.json when present, otherwise scans for *_rgb.png.
// Optional files are probed on disk and recorded as absent when missing.
DatasetIndex open_dataset(const std::filesystem::path& root);

// Writes manifest.json; keys not managed by DatasetIndex are preserved.
void write_manifest(const DatasetIndex& index);

// Builds the entry for a frame at `root`, probing for optional files.
FrameEntry probe_frame(const std::filesystem::path& root, const std::string& frame_id);

RgbdFrame load_frame(const DatasetIndex& index, const std::string& frame_id,
                     const DepthEncoding& encoding = {});
RgbdFrame load_frame(const FrameEntry& entry, const DepthEncoding& encoding = {});

// Writes rgb/depth/(inst, class) files; returns the entry describing them.
FrameEntry save_frame(const RgbdFrame& frame, const std::filesystem::path& root,
                      const DepthEncoding& encoding = {});

LabelMap load_label_png(const std::filesystem::path& path);
void save_label_png(const LabelMap& labels, const std::filesystem::path& path);

struct FilterOptions {
  int min_objects = 2;
  int min_object_pixels = 50;
};

struct FilterResult {
  DatasetIndex kept;
  std::vector<std::string> warnings;
};

// Keeps frames with at least min_objects instances of min_object_pixels each.
FilterResult filter_dataset(const DatasetIndex& index, const FilterOptions& options = {});

// Per-instance pixel counts of a label map, background excluded.
std::map<int, long> instance_areas(const LabelMap& labels);

}  // namespace supergbd
