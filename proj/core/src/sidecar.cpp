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

#include "supergbd/sidecar.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "supergbd/checksum.hpp"
#include "supergbd/error.hpp"

namespace supergbd {

namespace fs = std::filesystem;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[offset + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_sidecar(const ImplicitFeatures& features) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kSidecarMagic), std::end(kSidecarMagic));
  put_u32(out, kSidecarVersion);
  put_u32(out, static_cast<std::uint32_t>(features.rows.size()));
  put_u32(out, features.dim);
  for (std::size_t id = 0; id < features.rows.size(); ++id) {
    if (features.rows[id].size() != features.dim) {
      throw InvalidInput("sidecar row " + std::to_string(id) + " has inconsistent feature dimension");
    }
    put_u32(out, static_cast<std::uint32_t>(id));
    for (float v : features.rows[id]) put_f32(out, v);
  }
  put_u32(out, crc32(out));
  return out;
}

ImplicitFeatures decode_sidecar(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 20) throw Error("sidecar truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kSidecarMagic, 4) != 0) throw Error("sidecar has bad magic");
  const std::uint32_t stored_crc = get_u32(bytes, bytes.size() - 4);
  if (crc32(bytes.first(bytes.size() - 4)) != stored_crc) throw Error("sidecar checksum mismatch");
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kSidecarVersion) throw Error("unsupported sidecar version " + std::to_string(version));
  const std::uint32_t n = get_u32(bytes, 8);
  const std::uint32_t m = get_u32(bytes, 12);
  const std::uint64_t expected = 16 + static_cast<std::uint64_t>(n) * (4 + 4ULL * m) + 4;
  if (expected != bytes.size()) {
    throw Error("sidecar size " + std::to_string(bytes.size()) + " does not match header (expected " +
                std::to_string(expected) + ")");
  }
  ImplicitFeatures features;
  features.dim = m;
  features.rows.assign(n, {});
  std::vector<bool> seen(n, false);
  std::size_t offset = 16;
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::uint32_t id = get_u32(bytes, offset);
    offset += 4;
    if (id >= n) throw Error("sidecar patch id " + std::to_string(id) + " out of range");
    if (seen[id]) throw Error("sidecar patch id " + std::to_string(id) + " duplicated");
    seen[id] = true;
    auto& row = features.rows[id];
    row.resize(m);
    for (std::uint32_t k = 0; k < m; ++k) {
      row[k] = std::bit_cast<float>(get_u32(bytes, offset));
      offset += 4;
      if (!std::isfinite(row[k])) throw Error("sidecar value for patch " + std::to_string(id) + " is not finite");
    }
  }
  return features;
}

std::vector<std::uint8_t> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

void write_sidecar(const fs::path& path, const ImplicitFeatures& features) {
  write_file_bytes(path, encode_sidecar(features));
}

ImplicitFeatures read_sidecar(const fs::path& path) {
  try {
    return decode_sidecar(read_file_bytes(path));
  } catch (const Error& e) {
    throw Error(std::string(e.what()) + " ('" + path.string() + "')");
  }
}

}  // namespace supergbd
