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

#include "supergbd/render.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "supergbd/png_io.hpp"

namespace supergbd::tools {

std::array<std::uint8_t, 3> id_color(int id) {
  if (id <= 0) return {0, 0, 0};
  const double hue = std::fmod(id * 0.6180339887498949, 1.0) * 6.0;
  const double s = 0.85, v = 0.95;
  const int sector = static_cast<int>(hue);
  const double f = hue - sector;
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  double r = v, g = t, b = p;
  switch (sector % 6) {
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    case 5: r = v, g = p, b = q; break;
    default: break;
  }
  auto to8 = [](double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
  return {to8(r), to8(g), to8(b)};
}

namespace {

std::uint8_t to_byte(float v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

bool on_boundary(const LabelMap& labels, int r, int c) {
  const int id = labels(r, c);
  return (labels.in_bounds(r - 1, c) && labels(r - 1, c) != id) ||
         (labels.in_bounds(r + 1, c) && labels(r + 1, c) != id) ||
         (labels.in_bounds(r, c - 1) && labels(r, c - 1) != id) ||
         (labels.in_bounds(r, c + 1) && labels(r, c + 1) != id);
}

void blit(Rgb8& dst, const Rgb8& src, int col_offset) {
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < src.cols(); ++c) {
      for (int ch = 0; ch < 3; ++ch) dst(r, c + col_offset, ch) = src(r, c, ch);
    }
  }
}

Rgb8 colorize(const LabelMap& labels) {
  Rgb8 out(labels.rows(), labels.cols(), 3);
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      const auto color = id_color(labels(r, c));
      for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = color[ch];
    }
  }
  return out;
}

}  // namespace

Rgb8 render_overlay(const RgbdFrame& frame, const LabelMap& prediction) {
  Rgb8 out(frame.rows(), frame.cols(), 3);
  for (int r = 0; r < frame.rows(); ++r) {
    for (int c = 0; c < frame.cols(); ++c) {
      const bool edge = prediction(r, c) > 0 && on_boundary(prediction, r, c);
      const auto color = id_color(prediction(r, c));
      for (int ch = 0; ch < 3; ++ch) out(r, c, ch) = edge ? color[ch] : to_byte(frame.rgb(r, c, ch));
    }
  }
  return out;
}

Rgb8 render_panels(const RgbdFrame& frame, const LabelMap& prediction) {
  const int h = frame.rows(), w = frame.cols();
  const int panels = frame.instance_gt ? 4 : 3;
  Rgb8 out(h, w * panels, 3);
  Rgb8 rgb(h, w, 3), depth(h, w, 3);
  float lo = 1.0f, hi = 0.0f;
  for (std::size_t i = 0; i < frame.depth.pixel_count(); ++i) {
    if (!frame.valid[i]) continue;
    lo = std::min(lo, frame.depth[i]);
    hi = std::max(hi, frame.depth[i]);
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) rgb(r, c, ch) = to_byte(frame.rgb(r, c, ch));
      // Near is bright; invalid pixels stay black.
      const float d = frame.valid(r, c) && hi > lo ? 1.0f - 0.8f * (frame.depth(r, c) - lo) / (hi - lo) : 0.0f;
      for (int ch = 0; ch < 3; ++ch) depth(r, c, ch) = frame.valid(r, c) ? to_byte(d) : 0;
    }
  }
  int panel = 0;
  blit(out, rgb, w * panel++);
  blit(out, depth, w * panel++);
  if (frame.instance_gt) blit(out, colorize(*frame.instance_gt), w * panel++);
  blit(out, colorize(prediction), w * panel);
  return out;
}

void write_rgb8(const Rgb8& image, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(image.data().begin(), image.data().end());
  write_png(path, image.rows(), image.cols(), 3, 8, samples);
}

}  // namespace supergbd::tools
