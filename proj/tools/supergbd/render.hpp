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

#include "supergbd/image.hpp"
#include "supergbd/imagery.hpp"

namespace supergbd::tools {

using Rgb8 = Image<std::uint8_t>;

std::array<std::uint8_t, 3> id_color(int id);

// RGB image with every predicted segment's boundary drawn in its colour.
Rgb8 render_overlay(const RgbdFrame& frame, const LabelMap& prediction);

// Side-by-side panels: rgb | depth | ground truth (when present) | prediction.
Rgb8 render_panels(const RgbdFrame& frame, const LabelMap& prediction);

void write_rgb8(const Rgb8& image, const std::filesystem::path& path);

}  // namespace supergbd::tools
