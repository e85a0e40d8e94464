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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "supergbd/imagery.hpp"
#include "supergbd/random.hpp"

namespace supergbd {

// A procedural object family. Footprint sizes are in pixels for a 256-pixel
// image and scale with the shorter image side; heights are millimetres.
struct ShapeFamily {
  std::string name;
  std::array<double, 2> size_a;     // primary half-extent or radius
  std::array<double, 2> size_b;     // secondary half-extent, inner-radius ratio or bar thickness
  std::array<double, 2> height_mm;
  std::vector<std::array<float, 3>> palette;
};

// box, cylinder, sphere, lbracket, ring, wedge, cone, tblock
const std::vector<ShapeFamily>& builtin_families();
const ShapeFamily& find_family(const std::string& name);

struct SceneSpec {
  std::uint64_t seed = 0;
  int min_objects = 5;
  int max_objects = 25;
  int rows = 256;
  int cols = 256;
  std::vector<std::string> seen = {"box", "cylinder", "sphere", "wedge"};
  std::vector<std::string> unseen = {"ring", "lbracket"};
  std::array<double, 2> pitch_deg = {10.0, 35.0};
  std::array<double, 2> table_depth_mm = {900.0, 1300.0};
  double depth_noise_sigma = 0.002;  // normalized depth units
  double dropout_probability = 0.01;
  double texture_amplitude = 0.02;
  // Largest share of a new footprint that may cover already placed objects.
  double max_overlap = 0.35;
  int min_visible_pixels = 30;
  int placement_retries = 200;
  DepthEncoding encoding;

  void validate() const;
  SceneSpec without_noise() const;
};

enum class SceneSplit { kTrain, kTest };

// Geometry behind a generated scene: the table depth per pixel and the full
// (unoccluded) footprint of every kept object, in instance-id order.
struct SceneTrace {
  struct Object {
    std::string family;
    std::vector<std::pair<int, float>> pixels;  // flat index, height above the table in mm
  };
  std::vector<double> table_mm;
  std::vector<Object> objects;
};

// One table-top scene; train scenes draw only seen families. Noise is added
// after the ground truth is extracted.
RgbdFrame generate_scene(const SceneSpec& spec, SceneSplit split, Rng& rng, const std::string& frame_id = {},
                         SceneTrace* trace = nullptr);

// Seed of frame `index` for the given resampling attempt.
std::uint64_t frame_seed(std::uint64_t benchmark_seed, SceneSplit split, int index, int attempt);

// Test scenes are resampled until they contain an unseen-family object (up to
// a fixed attempt budget).
RgbdFrame generate_benchmark_frame(const SceneSpec& spec, SceneSplit split, int index, const std::string& frame_id,
                                   std::uint64_t* used_seed = nullptr);

// Writes train_NNNN / test_NNNN frames, manifest.json and benchmark.json.
DatasetIndex generate_benchmark(const SceneSpec& spec, int n_train, int n_test, const std::filesystem::path& out_root,
                                int jobs = 1);

// Rebuilds a frame from the spec and seed recorded in benchmark.json, before
// the 8-bit colour and millimetre depth quantization of the saved files.
RgbdFrame regenerate_frame(const std::filesystem::path& root, const std::string& frame_id);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

}  // namespace supergbd
