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
#include <span>
#include <vector>

namespace supergbd {

// Decoded PNG samples, widened to 16 bits regardless of the stored depth.
struct PngData {
  int rows = 0;
  int cols = 0;
  int channels = 0;   // 1 (gray) or 3 (RGB); alpha is stripped on read
  int bit_depth = 0;  // 8 or 16 as stored in the file
  std::vector<std::uint16_t> samples;
};

PngData read_png(const std::filesystem::path& path);

// Writes with pinned encoder settings so identical input yields identical bytes.
void write_png(const std::filesystem::path& path, int rows, int cols, int channels, int bit_depth,
               std::span<const std::uint16_t> samples);

}  // namespace supergbd
