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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "supergbd/image.hpp"
#include "supergbd/imagery.hpp"

namespace supergbd {

struct PatchInfo {
  long area = 0;
  double centroid_row = 0.0;
  double centroid_col = 0.0;
  int min_row = 0;
  int min_col = 0;
  int max_row = 0;  // inclusive
  int max_col = 0;  // inclusive
};

// Partition of an image into patches with contiguous ids 0..N-1.
struct SuperpixelMap {
  LabelMap labels;
  int patch_count = 0;
  std::vector<PatchInfo> patches;
  // Multiplier applied to rgb ids when this map came from combine_maps; 0 otherwise.
  std::int64_t shift_width = 0;
  // Patches merged away by small-patch absorption while building this map.
  int absorbed_count = 0;

  int rows() const { return labels.rows(); }
  int cols() const { return labels.cols(); }
};

struct SlicConfig {
  std::string algorithm = "slic";
  int target_patch_count = 128;
  double compactness = 10.0;
  int iterations = 10;
  // Absorption threshold for the combined rgb/depth map; slic() itself
  // absorbs fragments below a quarter of its grid cell.
  int min_patch_area = 16;
  std::uint64_t seed = 0;
  // Depth is multiplied by this before clustering so that depth steps are
  // commensurate with CIELAB distances.
  double depth_scale = 2000.0;

  void validate() const;
};

// Patch-count presets exposed on the command line.
inline constexpr int kPatchPresets[] = {32, 64, 128, 256};

// Builds metadata for a label image whose ids are already contiguous.
SuperpixelMap make_superpixel_map(LabelMap labels);

// Splits every id into its 4-connected components; new ids follow raster
// order of first occurrence.
LabelMap split_connected(const LabelMap& labels, int* component_count = nullptr);

// Relabels ids to 0..N-1 in raster order of first occurrence.
LabelMap relabel_contiguous(const LabelMap& labels, int* count = nullptr);

// Merges every patch smaller than min_area into its largest 4-adjacent
// neighbour, smallest patches first. Input ids must be contiguous; output ids
// are contiguous in raster order. Returns the number of merged patches.
int absorb_small_patches(LabelMap& labels, int min_area);

// k-means SLIC over an H x W x C feature image.
SuperpixelMap slic(const Image<float>& channels, const SlicConfig& config);

// sRGB in [0,1] to CIELAB (D65 white).
Image<float> rgb_to_lab(const Image<float>& rgb);

SuperpixelMap slic_rgb(const RgbdFrame& frame, const SlicConfig& config);
SuperpixelMap slic_depth(const RgbdFrame& frame, const SlicConfig& config);

// Width by which rgb ids are shifted: 1000, widened to the next power of ten
// when the depth map has 1000 or more patches.
std::int64_t combine_shift_width(int depth_patch_count);

inline std::int64_t combined_key(std::int64_t rgb_id, std::int64_t depth_id, std::int64_t shift) {
  return rgb_id * shift + depth_id;
}

// Intersection of the two partitions split into 4-connected pieces, before
// any small-patch absorption.
SuperpixelMap combine_maps_unabsorbed(const SuperpixelMap& rgb_map, const SuperpixelMap& depth_map);

SuperpixelMap combine_maps(const SuperpixelMap& rgb_map, const SuperpixelMap& depth_map, int min_patch_area = 16);

// <id>_spx.png holds 16-bit patch ids; the JSON echoes count, shift and config.
void save_superpixel_map(const SuperpixelMap& map, const std::filesystem::path& png_path,
                         const std::filesystem::path& json_path, const SlicConfig& config);
SuperpixelMap load_superpixel_map(const std::filesystem::path& png_path);

}  // namespace supergbd
