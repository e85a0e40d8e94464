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
#include <span>
#include <string>

namespace supergbd {

// IEEE 802.3 CRC32 (the zlib polynomial).
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Lowercase 8-digit hex rendering of a CRC32.
std::string crc32_hex(std::span<const std::uint8_t> bytes);

}  // namespace supergbd
