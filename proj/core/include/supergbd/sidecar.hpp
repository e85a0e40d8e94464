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
#include <string>
#include <vector>

namespace supergbd {

// Per-patch implicit features (one row of M floats per patch id).
struct ImplicitFeatures {
  std::uint32_t dim = 0;
  std::vector<std::vector<float>> rows;  // indexed by patch id

  std::size_t patch_count() const { return rows.size(); }
};

// `.spxf` layout, little-endian: "SPXF", u32 version (1), u32 N, u32 M,
// N x (u32 patch_id, M x f32), u32 CRC32 of everything before it.
inline constexpr char kSidecarMagic[4] = {'S', 'P', 'X', 'F'};
inline constexpr std::uint32_t kSidecarVersion = 1;

std::vector<std::uint8_t> encode_sidecar(const ImplicitFeatures& features);
void write_sidecar(const std::filesystem::path& path, const ImplicitFeatures& features);

// Throws Error on bad magic/version/CRC, truncation, duplicate or missing ids.
ImplicitFeatures decode_sidecar(std::span<const std::uint8_t> bytes);
ImplicitFeatures read_sidecar(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace supergbd
