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

#include <gtest/gtest.h>

#include <cstring>

#include "oracles.hpp"
#include "supergbd/checksum.hpp"
#include "supergbd/error.hpp"
#include "supergbd/sidecar.hpp"

namespace sg = supergbd;

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

// Little-endian layout written field by field, records in the given id order.
std::vector<std::uint8_t> hand_encode(const std::vector<std::uint32_t>& order, std::uint32_t n,
                                      const std::vector<std::vector<float>>& rows) {
  std::vector<std::uint8_t> out = {'S', 'P', 'X', 'F'};
  put_u32(out, 1);
  put_u32(out, n);
  put_u32(out, static_cast<std::uint32_t>(rows.empty() ? 0 : rows.front().size()));
  for (std::uint32_t id : order) {
    put_u32(out, id);
    for (float v : rows[id]) put_f32(out, v);
  }
  put_u32(out, sg::crc32(out));
  return out;
}

sg::ImplicitFeatures sample_features() {
  sg::ImplicitFeatures f;
  f.dim = 3;
  f.rows = {{0.0f, 0.5f, 1.0f}, {0.25f, -1.5f, 3.0f}, {7.0f, 8.0f, 9.0f}};
  return f;
}

}  // namespace

TEST(Sidecar, EncoderMatchesHandLayout) {
  const auto f = sample_features();
  EXPECT_EQ(sg::encode_sidecar(f), hand_encode({0, 1, 2}, 3, f.rows));
}

TEST(Sidecar, DecodesAnyRecordOrder) {
  const auto f = sample_features();
  const auto back = sg::decode_sidecar(hand_encode({2, 0, 1}, 3, f.rows));
  EXPECT_EQ(back.dim, 3u);
  EXPECT_EQ(back.rows, f.rows);
}

TEST(Sidecar, FileRoundTrip) {
  sg::testing::TempDir tmp("spxf");
  const auto f = sample_features();
  sg::write_sidecar(tmp.path() / "a.spxf", f);
  EXPECT_EQ(sg::read_sidecar(tmp.path() / "a.spxf").rows, f.rows);
}

TEST(Sidecar, CorruptionDetected) {
  const auto f = sample_features();
  auto bytes = hand_encode({0, 1, 2}, 3, f.rows);
  auto truncated = bytes;
  truncated.resize(truncated.size() - 5);
  EXPECT_THROW(sg::decode_sidecar(truncated), sg::Error);

  auto flipped = bytes;
  flipped[20] ^= 0x1;
  EXPECT_THROW(sg::decode_sidecar(flipped), sg::Error);

  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(sg::decode_sidecar(magic), sg::Error);

  // Valid checksum but patch 1 written twice and patch 2 missing.
  EXPECT_THROW(sg::decode_sidecar(hand_encode({0, 1, 1}, 3, f.rows)), sg::Error);
  // Id out of range.
  auto rows4 = f.rows;
  rows4.push_back({1, 2, 3});
  EXPECT_THROW(sg::decode_sidecar(hand_encode({0, 1, 3}, 3, rows4)), sg::Error);
}
