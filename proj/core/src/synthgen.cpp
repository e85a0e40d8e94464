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

#include "supergbd/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/parallel.hpp"

namespace supergbd {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<ShapeFamily>& builtin_families() {
  static const std::vector<ShapeFamily> families = {
      {"box", {10, 22}, {8, 18}, {40, 160}, {{0.85f, 0.20f, 0.15f}, {0.15f, 0.35f, 0.80f}, {0.95f, 0.75f, 0.10f}, {0.20f, 0.65f, 0.30f}}},
      {"cylinder", {9, 20}, {0, 0}, {60, 220}, {{0.10f, 0.60f, 0.70f}, {0.80f, 0.30f, 0.60f}, {0.90f, 0.50f, 0.10f}, {0.40f, 0.25f, 0.70f}}},
      {"sphere", {9, 20}, {0, 0}, {50, 150}, {{0.90f, 0.85f, 0.20f}, {0.70f, 0.10f, 0.20f}, {0.20f, 0.50f, 0.90f}, {0.30f, 0.80f, 0.50f}}},
      {"lbracket", {12, 22}, {5, 9}, {30, 100}, {{0.60f, 0.60f, 0.65f}, {0.20f, 0.20f, 0.25f}, {0.75f, 0.45f, 0.20f}, {0.15f, 0.55f, 0.55f}}},
      {"ring", {12, 22}, {0.4, 0.6}, {30, 80}, {{0.95f, 0.60f, 0.70f}, {0.30f, 0.70f, 0.20f}, {0.85f, 0.85f, 0.80f}, {0.55f, 0.20f, 0.45f}}},
      {"wedge", {10, 20}, {8, 16}, {50, 150}, {{0.65f, 0.35f, 0.15f}, {0.20f, 0.75f, 0.75f}, {0.90f, 0.30f, 0.35f}, {0.45f, 0.45f, 0.85f}}},
      {"cone", {10, 20}, {0, 0}, {80, 200}, {{0.95f, 0.45f, 0.05f}, {0.25f, 0.40f, 0.15f}, {0.60f, 0.15f, 0.75f}, {0.10f, 0.30f, 0.50f}}},
      {"tblock", {12, 22}, {5, 9}, {30, 100}, {{0.80f, 0.75f, 0.55f}, {0.35f, 0.15f, 0.10f}, {0.20f, 0.60f, 0.85f}, {0.70f, 0.70f, 0.20f}}},
  };
  return families;
}

const ShapeFamily& find_family(const std::string& name) {
  for (const auto& f : builtin_families()) {
    if (f.name == name) return f;
  }
  throw InvalidInput("unknown shape family '" + name + "'");
}

void SceneSpec::validate() const {
  if (min_objects < 1 || max_objects < min_objects) throw InvalidInput("object count range must satisfy 1 <= min <= max");
  if (rows < 32 || cols < 32) throw InvalidInput("scene images must be at least 32 x 32");
  if (seen.empty()) throw InvalidInput("at least one seen family is required");
  std::set<std::string> names;
  for (const auto& n : seen) {
    find_family(n);
    if (!names.insert(n).second) throw InvalidInput("family '" + n + "' listed twice");
  }
  for (const auto& n : unseen) {
    find_family(n);
    if (!names.insert(n).second) throw InvalidInput("family '" + n + "' is both seen and unseen or listed twice");
  }
  if (pitch_deg[0] < 0.0 || pitch_deg[1] < pitch_deg[0] || pitch_deg[1] >= 80.0) {
    throw InvalidInput("pitch range must satisfy 0 <= lo <= hi < 80 degrees");
  }
  if (table_depth_mm[0] <= 0.0 || table_depth_mm[1] < table_depth_mm[0]) throw InvalidInput("bad table depth range");
  if (depth_noise_sigma < 0.0 || texture_amplitude < 0.0) throw InvalidInput("noise amplitudes must be >= 0");
  if (dropout_probability < 0.0 || dropout_probability >= 1.0) throw InvalidInput("dropout probability must lie in [0, 1)");
  if (max_overlap < 0.0 || max_overlap >= 1.0) throw InvalidInput("max overlap must lie in [0, 1)");
  if (min_visible_pixels < 1 || placement_retries < 1) throw InvalidInput("visibility and retry limits must be >= 1");
  if (encoding.max_depth_mm <= 0.0) throw InvalidInput("max depth must be positive");
}

SceneSpec SceneSpec::without_noise() const {
  SceneSpec s = *this;
  s.depth_noise_sigma = 0.0;
  s.dropout_probability = 0.0;
  s.texture_amplitude = 0.0;
  return s;
}

namespace {

struct Shape {
  const ShapeFamily* family = nullptr;
  double cx = 0.0, cy = 0.0, angle = 0.0;
  double a = 0.0, b = 0.0, height = 0.0;
  std::array<float, 3> color{};
  std::vector<std::pair<int, float>> pixels;  // flat index, height in mm
};

// Height in mm at local coordinates (u, v), or a negative value outside.
double shape_height(const Shape& s, double u, double v) {
  const std::string& name = s.family->name;
  const double a = s.a, b = s.b, h = s.height;
  const double rho = std::sqrt(u * u + v * v) / a;
  if (name == "box") return (std::abs(u) <= a && std::abs(v) <= b) ? h : -1.0;
  if (name == "cylinder") return rho <= 1.0 ? h : -1.0;
  if (name == "sphere") return rho <= 1.0 ? 0.5 * h * (1.0 + std::sqrt(1.0 - rho * rho)) : -1.0;
  if (name == "cone") return rho <= 1.0 ? h * (1.0 - 0.85 * rho) : -1.0;
  if (name == "ring") return (rho <= 1.0 && rho >= b) ? h : -1.0;
  if (name == "wedge") return (std::abs(u) <= a && std::abs(v) <= b) ? h * (0.2 + 0.8 * (u + a) / (2.0 * a)) : -1.0;
  if (name == "lbracket") {
    const bool top = std::abs(u) <= a && v >= a - b && v <= a;
    const bool side = u >= -a && u <= -a + b && std::abs(v) <= a;
    return (top || side) ? h : -1.0;
  }
  if (name == "tblock") {
    const bool bar = std::abs(u) <= a && v >= a - b && v <= a;
    const bool stem = std::abs(u) <= 0.5 * b && std::abs(v) <= a;
    return (bar || stem) ? h : -1.0;
  }
  throw InvalidInput("no rasterizer for family '" + name + "'");
}

double bounding_radius(const Shape& s) {
  const std::string& name = s.family->name;
  if (name == "box" || name == "wedge") return std::hypot(s.a, s.b);
  if (name == "lbracket" || name == "tblock") return s.a * std::numbers::sqrt2;
  return s.a;
}

void rasterize(Shape& s, int rows, int cols) {
  s.pixels.clear();
  const double radius = bounding_radius(s) + 1.0;
  const int r0 = std::max(0, static_cast<int>(std::floor(s.cy - radius)));
  const int r1 = std::min(rows - 1, static_cast<int>(std::ceil(s.cy + radius)));
  const int c0 = std::max(0, static_cast<int>(std::floor(s.cx - radius)));
  const int c1 = std::min(cols - 1, static_cast<int>(std::ceil(s.cx + radius)));
  const double cs = std::cos(s.angle), sn = std::sin(s.angle);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const double dx = c + 0.5 - s.cx;
      const double dy = r + 0.5 - s.cy;
      const double u = cs * dx + sn * dy;
      const double v = -sn * dx + cs * dy;
      const double h = shape_height(s, u, v);
      if (h > 0.0) s.pixels.emplace_back(r * cols + c, static_cast<float>(h));
    }
  }
}

// Painter's rule: the smallest depth wins, ties go to the lower index.
void compose(const std::vector<Shape>& shapes, const std::vector<double>& table_mm, std::vector<double>& depth_mm, std::vector<int>& owner) {
  depth_mm = table_mm;
  owner.assign(table_mm.size(), 0);
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    for (const auto& [idx, h] : shapes[k].pixels) {
      const double d = table_mm[idx] - h;
      if (d < depth_mm[idx]) {
        depth_mm[idx] = d;
        owner[idx] = static_cast<int>(k) + 1;
      }
    }
  }
}

std::array<float, 3> jitter(const std::array<float, 3>& base, double amount, Rng& rng) {
  std::array<float, 3> out{};
  for (int i = 0; i < 3; ++i) {
    out[i] = static_cast<float>(std::clamp(base[i] + rng.uniform(-amount, amount), 0.0, 1.0));
  }
  return out;
}

const std::array<std::array<float, 3>, 4> kTableColors = {{
    {0.55f, 0.45f, 0.35f}, {0.60f, 0.60f, 0.58f}, {0.42f, 0.36f, 0.30f}, {0.70f, 0.66f, 0.58f},
}};

json spec_to_json_value(const SceneSpec& s) {
  return {{"seed", s.seed},
          {"min_objects", s.min_objects},
          {"max_objects", s.max_objects},
          {"rows", s.rows},
          {"cols", s.cols},
          {"seen", s.seen},
          {"unseen", s.unseen},
          {"pitch_deg", s.pitch_deg},
          {"table_depth_mm", s.table_depth_mm},
          {"depth_noise_sigma", s.depth_noise_sigma},
          {"dropout_probability", s.dropout_probability},
          {"texture_amplitude", s.texture_amplitude},
          {"max_overlap", s.max_overlap},
          {"min_visible_pixels", s.min_visible_pixels},
          {"placement_retries", s.placement_retries},
          {"max_depth_mm", s.encoding.max_depth_mm}};
}

}  // namespace

RgbdFrame generate_scene(const SceneSpec& spec, SceneSplit split, Rng& rng, const std::string& frame_id,
                         SceneTrace* trace) {
  spec.validate();
  const int rows = spec.rows, cols = spec.cols;
  const double scale = std::min(rows, cols) / 256.0;
  std::vector<const ShapeFamily*> pool;
  for (const auto& n : spec.seen) pool.push_back(&find_family(n));
  if (split == SceneSplit::kTest) {
    for (const auto& n : spec.unseen) pool.push_back(&find_family(n));
  }

  // Table plane tilted away from the camera along the image rows.
  const double table_center = rng.uniform(spec.table_depth_mm[0], spec.table_depth_mm[1]);
  const double pitch = rng.uniform(spec.pitch_deg[0], spec.pitch_deg[1]) * std::numbers::pi / 180.0;
  const double span = 1000.0 * std::tan(pitch);
  std::vector<double> table_mm(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    const double d = table_center + span * (0.5 - (r + 0.5) / rows);
    for (int c = 0; c < cols; ++c) table_mm[static_cast<std::size_t>(r) * cols + c] = d;
  }
  const auto table_color =
      jitter(kTableColors[static_cast<std::size_t>(rng.uniform_int(0, kTableColors.size() - 1))], 0.05, rng);

  const int count = static_cast<int>(rng.uniform_int(spec.min_objects, spec.max_objects));
  std::vector<Shape> shapes;
  std::vector<std::uint8_t> occupied(table_mm.size(), 0);
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < spec.placement_retries && !placed; ++attempt) {
      Shape s;
      s.family = pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
      s.a = rng.uniform(s.family->size_a[0], s.family->size_a[1]) * scale;
      const bool b_is_length = s.family->name == "box" || s.family->name == "wedge" ||
                               s.family->name == "lbracket" || s.family->name == "tblock";
      s.b = rng.uniform(s.family->size_b[0], s.family->size_b[1]) * (b_is_length ? scale : 1.0);
      s.height = rng.uniform(s.family->height_mm[0], s.family->height_mm[1]);
      s.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radius = bounding_radius(s);
      if (2.0 * radius >= std::min(rows, cols)) continue;
      s.cx = rng.uniform(radius, cols - radius);
      s.cy = rng.uniform(radius, rows - radius);
      s.color = jitter(s.family->palette[static_cast<std::size_t>(
                           rng.uniform_int(0, static_cast<std::int64_t>(s.family->palette.size()) - 1))],
                       0.06, rng);
      rasterize(s, rows, cols);
      if (s.pixels.empty()) continue;
      std::size_t covered = 0;
      for (const auto& px : s.pixels) covered += occupied[px.first];
      if (static_cast<double>(covered) > spec.max_overlap * static_cast<double>(s.pixels.size())) continue;
      for (const auto& px : s.pixels) occupied[px.first] = 1;
      shapes.push_back(std::move(s));
      placed = true;
    }
    if (!placed) {
      throw Error("overcrowded scene: could not place object " + std::to_string(k + 1) + " of " +
                  std::to_string(count) + " within " + std::to_string(spec.placement_retries) + " attempts");
    }
  }

  // Drop objects that end up (nearly) hidden and recompose until stable.
  std::vector<double> depth_mm;
  std::vector<int> owner;
  for (;;) {
    compose(shapes, table_mm, depth_mm, owner);
    std::vector<long> visible(shapes.size() + 1, 0);
    for (int o : owner) ++visible[o];
    std::vector<Shape> kept;
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      if (visible[k + 1] >= spec.min_visible_pixels) kept.push_back(std::move(shapes[k]));
    }
    if (kept.size() == shapes.size()) {
      shapes = std::move(kept);
      break;
    }
    shapes = std::move(kept);
  }
  if (shapes.empty()) throw Error("scene has no visible objects");
  if (trace != nullptr) {
    trace->table_mm = table_mm;
    trace->objects.clear();
    for (const auto& s : shapes) trace->objects.push_back({s.family->name, s.pixels});
  }

  RgbdFrame frame;
  frame.frame_id = frame_id;
  frame.rgb = Image<float>(rows, cols, 3);
  frame.depth = Image<float>(rows, cols);
  frame.valid = Mask(rows, cols, 1, 1);
  frame.instance_gt = LabelMap(rows, cols);
  std::map<int, std::string> classes;
  for (std::size_t k = 0; k < shapes.size(); ++k) classes[static_cast<int>(k) + 1] = shapes[k].family->name;
  frame.class_of_instance = std::move(classes);

  const double max_mm = spec.encoding.max_depth_mm;
  for (std::size_t i = 0; i < table_mm.size(); ++i) {
    (*frame.instance_gt)[i] = owner[i];
    frame.depth[i] = static_cast<float>(std::clamp(depth_mm[i] / max_mm, 0.0, 1.0));
    const auto& color = owner[i] == 0 ? table_color : shapes[owner[i] - 1].color;
    for (int ch = 0; ch < 3; ++ch) frame.rgb.data()[i * 3 + ch] = color[ch];
  }

  // Sensor effects, applied after the ground truth is fixed.
  if (spec.texture_amplitude > 0.0) {
    for (float& v : frame.rgb.data()) {
      v = static_cast<float>(std::clamp(v + spec.texture_amplitude * rng.normal(), 0.0, 1.0));
    }
  }
  if (spec.depth_noise_sigma > 0.0 || spec.dropout_probability > 0.0) {
    for (std::size_t i = 0; i < table_mm.size(); ++i) {
      if (spec.dropout_probability > 0.0 && rng.bernoulli(spec.dropout_probability)) {
        frame.depth[i] = 0.0f;
        frame.valid[i] = 0;
        continue;
      }
      if (spec.depth_noise_sigma > 0.0) {
        const double d = frame.depth[i] + spec.depth_noise_sigma * rng.normal();
        frame.depth[i] = static_cast<float>(std::clamp(d, 1.0 / max_mm, 1.0));
      }
    }
  }
  return frame;
}

std::uint64_t frame_seed(std::uint64_t benchmark_seed, SceneSplit split, int index, int attempt) {
  const std::uint64_t s = mix_seed(benchmark_seed, split == SceneSplit::kTrain ? 1 : 2);
  return mix_seed(mix_seed(s, static_cast<std::uint64_t>(index)), static_cast<std::uint64_t>(attempt));
}

RgbdFrame generate_benchmark_frame(const SceneSpec& spec, SceneSplit split, int index, const std::string& frame_id,
                                   std::uint64_t* used_seed) {
  constexpr int kAttempts = 64;
  const std::set<std::string> unseen(spec.unseen.begin(), spec.unseen.end());
  RgbdFrame frame;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    const std::uint64_t seed = frame_seed(spec.seed, split, index, attempt);
    Rng rng(seed);
    frame = generate_scene(spec, split, rng, frame_id);
    if (used_seed != nullptr) *used_seed = seed;
    if (split == SceneSplit::kTrain || unseen.empty()) break;
    const bool has_unseen = std::any_of(frame.class_of_instance->begin(), frame.class_of_instance->end(),
                                        [&](const auto& kv) { return unseen.contains(kv.second); });
    if (has_unseen) break;
  }
  return frame;
}

DatasetIndex generate_benchmark(const SceneSpec& spec, int n_train, int n_test, const fs::path& out_root, int jobs) {
  spec.validate();
  if (n_train < 1 || n_test < 1) throw InvalidInput("benchmark needs at least one train and one test frame");
  fs::create_directories(out_root);

  struct Job {
    std::string id;
    SceneSplit split;
    int index;
  };
  std::vector<Job> work;
  auto name = [](const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d", prefix, i);
    return std::string(buf);
  };
  for (int i = 0; i < n_train; ++i) work.push_back({name("train", i), SceneSplit::kTrain, i});
  for (int i = 0; i < n_test; ++i) work.push_back({name("test", i), SceneSplit::kTest, i});

  std::vector<FrameEntry> entries(work.size());
  std::vector<std::uint64_t> seeds(work.size());
  parallel_for(work.size(), jobs, [&](std::size_t i) {
    const RgbdFrame frame = generate_benchmark_frame(spec, work[i].split, work[i].index, work[i].id, &seeds[i]);
    entries[i] = save_frame(frame, out_root, spec.encoding);
    entries[i].split = work[i].split == SceneSplit::kTrain ? "train" : "test";
  });

  DatasetIndex index;
  index.root = out_root;
  index.frames = std::move(entries);
  index.seen_classes = spec.seen;
  index.unseen_classes = spec.unseen;
  write_manifest(index);

  json bench;
  bench["spec"] = spec_to_json_value(spec);
  json frames = json::array();
  for (std::size_t i = 0; i < work.size(); ++i) {
    frames.push_back({{"id", work[i].id}, {"split", index.frames[i].split}, {"seed", seeds[i]}});
  }
  bench["frames"] = std::move(frames);
  std::ofstream out(out_root / "benchmark.json", std::ios::binary);
  out << bench.dump(2) << '\n';
  if (!out) throw Error("cannot write " + (out_root / "benchmark.json").string());
  return index;
}

RgbdFrame regenerate_frame(const fs::path& root, const std::string& frame_id) {
  std::ifstream in(root / "benchmark.json", std::ios::binary);
  if (!in) throw Error("cannot open " + (root / "benchmark.json").string());
  json bench;
  try {
    bench = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("benchmark.json: " + std::string(e.what()));
  }
  const SceneSpec spec = scene_spec_from_json(bench.at("spec").dump());
  for (const auto& f : bench.at("frames")) {
    if (f.at("id").get<std::string>() != frame_id) continue;
    const SceneSplit split = f.at("split").get<std::string>() == "train" ? SceneSplit::kTrain : SceneSplit::kTest;
    Rng rng(f.at("seed").get<std::uint64_t>());
    return generate_scene(spec, split, rng, frame_id);
  }
  throw InvalidInput("frame '" + frame_id + "' is not listed in benchmark.json");
}

std::string scene_spec_to_json(const SceneSpec& spec) { return spec_to_json_value(spec).dump(2); }

SceneSpec scene_spec_from_json(const std::string& text) {
  SceneSpec s;
  try {
    const json j = json::parse(text);
    s.seed = j.value("seed", s.seed);
    s.min_objects = j.value("min_objects", s.min_objects);
    s.max_objects = j.value("max_objects", s.max_objects);
    s.rows = j.value("rows", s.rows);
    s.cols = j.value("cols", s.cols);
    s.seen = j.value("seen", s.seen);
    s.unseen = j.value("unseen", s.unseen);
    s.pitch_deg = j.value("pitch_deg", s.pitch_deg);
    s.table_depth_mm = j.value("table_depth_mm", s.table_depth_mm);
    s.depth_noise_sigma = j.value("depth_noise_sigma", s.depth_noise_sigma);
    s.dropout_probability = j.value("dropout_probability", s.dropout_probability);
    s.texture_amplitude = j.value("texture_amplitude", s.texture_amplitude);
    s.max_overlap = j.value("max_overlap", s.max_overlap);
    s.min_visible_pixels = j.value("min_visible_pixels", s.min_visible_pixels);
    s.placement_retries = j.value("placement_retries", s.placement_retries);
    s.encoding.max_depth_mm = j.value("max_depth_mm", s.encoding.max_depth_mm);
  } catch (const json::exception& e) {
    throw InvalidInput("scene spec: " + std::string(e.what()));
  }
  s.validate();
  return s;
}

}  // namespace supergbd
