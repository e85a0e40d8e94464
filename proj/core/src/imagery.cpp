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

#include "supergbd/imagery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/png_io.hpp"

namespace supergbd {

namespace fs = std::filesystem;
using nlohmann::json;

void RgbdFrame::validate() const {
  const int h = depth.rows();
  const int w = depth.cols();
  if (h <= 0 || w <= 0) throw InvalidInput("frame '" + frame_id + "': empty depth map");
  if (!rgb.same_size(depth) || rgb.channels() != 3) {
    throw InvalidInput("frame '" + frame_id + "': rgb must be H x W x 3 matching depth");
  }
  if (!valid.same_size(depth)) throw InvalidInput("frame '" + frame_id + "': valid mask size mismatch");
  for (float v : rgb.data()) {
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InvalidInput("frame '" + frame_id + "': rgb value outside [0,1]");
    }
  }
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    const float d = depth[i];
    if (!std::isfinite(d) || d < 0.0f || d > 1.0f) {
      throw InvalidInput("frame '" + frame_id + "': depth value outside [0,1]");
    }
    if (!valid[i] && d != 0.0f) throw InvalidInput("frame '" + frame_id + "': invalid pixel with depth");
  }
  if (instance_gt) {
    if (!instance_gt->same_size(depth)) throw InvalidInput("frame '" + frame_id + "': instance map size mismatch");
    for (std::int32_t id : instance_gt->data()) {
      if (id < 0) throw InvalidInput("frame '" + frame_id + "': negative instance id");
      if (id > 0 && class_of_instance && !class_of_instance->contains(id)) {
        throw InvalidInput("frame '" + frame_id + "': instance " + std::to_string(id) + " has no class");
      }
    }
  }
}

const FrameEntry& DatasetIndex::find(const std::string& frame_id) const {
  for (const auto& f : frames) {
    if (f.id == frame_id) return f;
  }
  throw InvalidInput("frame '" + frame_id + "' not in dataset '" + root.string() + "'");
}

bool DatasetIndex::contains(const std::string& frame_id) const {
  return std::any_of(frames.begin(), frames.end(), [&](const FrameEntry& f) { return f.id == frame_id; });
}

std::vector<std::string> DatasetIndex::frame_ids(const std::string& split) const {
  std::vector<std::string> ids;
  for (const auto& f : frames) {
    if (split.empty() || f.split == split) ids.push_back(f.id);
  }
  return ids;
}

fs::path FramePaths::rgb(const fs::path& root, const std::string& id) { return root / (id + "_rgb.png"); }
fs::path FramePaths::depth(const fs::path& root, const std::string& id) { return root / (id + "_depth.png"); }
fs::path FramePaths::instances(const fs::path& root, const std::string& id) { return root / (id + "_inst.png"); }
fs::path FramePaths::classes(const fs::path& root, const std::string& id) { return root / (id + "_class.json"); }
fs::path FramePaths::sidecar(const fs::path& root, const std::string& id) { return root / (id + ".spxf"); }

FrameEntry probe_frame(const fs::path& root, const std::string& frame_id) {
  FrameEntry e;
  e.id = frame_id;
  e.rgb = FramePaths::rgb(root, frame_id);
  e.depth = FramePaths::depth(root, frame_id);
  if (fs::exists(FramePaths::instances(root, frame_id))) e.instances = FramePaths::instances(root, frame_id);
  if (fs::exists(FramePaths::classes(root, frame_id))) e.classes = FramePaths::classes(root, frame_id);
  if (fs::exists(FramePaths::sidecar(root, frame_id))) e.sidecar = FramePaths::sidecar(root, frame_id);
  return e;
}

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

}  // namespace

DatasetIndex open_dataset(const fs::path& root) {
  if (!fs::is_directory(root)) throw Error("dataset root '" + root.string() + "' is not a directory");
  DatasetIndex index;
  index.root = root;
  const fs::path manifest = root / "manifest.json";
  if (fs::exists(manifest)) {
    const json j = read_json_file(manifest);
    for (const auto& f : j.value("frames", json::array())) {
      FrameEntry e = probe_frame(root, f.at("id").get<std::string>());
      e.split = f.value("split", "");
      e.tag = f.value("tag", "");
      index.frames.push_back(std::move(e));
    }
    index.seen_classes = j.value("seen", std::vector<std::string>{});
    index.unseen_classes = j.value("unseen", std::vector<std::string>{});
  } else {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(root)) {
      const std::string name = entry.path().filename().string();
      constexpr std::string_view suffix = "_rgb.png";
      if (name.size() > suffix.size() && name.ends_with(suffix)) {
        ids.push_back(name.substr(0, name.size() - suffix.size()));
      }
    }
    std::sort(ids.begin(), ids.end());
    for (const auto& id : ids) index.frames.push_back(probe_frame(root, id));
  }
  for (const auto& e : index.frames) {
    if (!fs::exists(e.rgb)) throw Error("frame '" + e.id + "': missing rgb file '" + e.rgb.string() + "'");
    if (!fs::exists(e.depth)) throw Error("frame '" + e.id + "': missing depth file '" + e.depth.string() + "'");
  }
  return index;
}

void write_manifest(const DatasetIndex& index) {
  const fs::path path = index.root / "manifest.json";
  json j = fs::exists(path) ? read_json_file(path) : json::object();
  json frames = json::array();
  for (const auto& f : index.frames) {
    json e = {{"id", f.id}, {"split", f.split}};
    if (!f.tag.empty()) e["tag"] = f.tag;
    frames.push_back(std::move(e));
  }
  j["frames"] = std::move(frames);
  j["seen"] = index.seen_classes;
  j["unseen"] = index.unseen_classes;
  write_json_file(path, j);
}

LabelMap load_label_png(const fs::path& path) {
  const PngData png = read_png(path);
  if (png.channels != 1) throw Error("label map '" + path.string() + "' must be single-channel");
  LabelMap labels(png.rows, png.cols);
  for (std::size_t i = 0; i < labels.pixel_count(); ++i) labels[i] = png.samples[i];
  return labels;
}

void save_label_png(const LabelMap& labels, const fs::path& path) {
  std::vector<std::uint16_t> samples(labels.pixel_count());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (labels[i] < 0 || labels[i] > 65535) {
      throw InvalidInput("label " + std::to_string(labels[i]) + " exceeds the 16-bit id space");
    }
    samples[i] = static_cast<std::uint16_t>(labels[i]);
  }
  write_png(path, labels.rows(), labels.cols(), 1, 16, samples);
}

RgbdFrame load_frame(const DatasetIndex& index, const std::string& frame_id, const DepthEncoding& encoding) {
  return load_frame(index.find(frame_id), encoding);
}

RgbdFrame load_frame(const FrameEntry& entry, const DepthEncoding& encoding) {
  auto fail = [&](const std::string& what, const fs::path& p) -> Error {
    return Error("frame '" + entry.id + "': " + what + " ('" + p.string() + "')");
  };
  if (!fs::exists(entry.rgb)) throw fail("missing rgb file", entry.rgb);
  if (!fs::exists(entry.depth)) throw fail("missing depth file", entry.depth);

  RgbdFrame frame;
  frame.frame_id = entry.id;

  PngData rgb;
  try {
    rgb = read_png(entry.rgb);
  } catch (const Error& e) {
    throw fail(std::string("unparseable rgb image: ") + e.what(), entry.rgb);
  }
  if (rgb.channels != 3) throw fail("rgb image must have 3 channels", entry.rgb);
  const double rgb_scale = rgb.bit_depth == 16 ? 65535.0 : 255.0;
  frame.rgb = Image<float>(rgb.rows, rgb.cols, 3);
  for (std::size_t i = 0; i < rgb.samples.size(); ++i) {
    frame.rgb.data()[i] = static_cast<float>(rgb.samples[i] / rgb_scale);
  }

  PngData depth;
  try {
    depth = read_png(entry.depth);
  } catch (const Error& e) {
    throw fail(std::string("unparseable depth image: ") + e.what(), entry.depth);
  }
  if (depth.channels != 1) throw fail("depth image must be single-channel", entry.depth);
  if (depth.rows != rgb.rows || depth.cols != rgb.cols) throw fail("depth/rgb dimension mismatch", entry.depth);
  frame.depth = Image<float>(depth.rows, depth.cols);
  frame.valid = Mask(depth.rows, depth.cols);
  for (std::size_t i = 0; i < depth.samples.size(); ++i) {
    const std::uint16_t mm = depth.samples[i];
    if (mm == 0) continue;
    frame.valid[i] = 1;
    frame.depth[i] = static_cast<float>(std::clamp(mm / encoding.max_depth_mm, 0.0, 1.0));
  }

  if (entry.instances) {
    try {
      frame.instance_gt = load_label_png(*entry.instances);
    } catch (const Error& e) {
      throw fail(std::string("unparseable instance map: ") + e.what(), *entry.instances);
    }
    if (!frame.instance_gt->same_size(frame.depth)) throw fail("instance/depth dimension mismatch", *entry.instances);
  }
  if (entry.classes) {
    const json j = read_json_file(*entry.classes);
    std::map<int, std::string> classes;
    for (const auto& [key, value] : j.items()) {
      try {
        classes[std::stoi(key)] = value.get<std::string>();
      } catch (const std::exception&) {
        throw fail("bad class entry '" + key + "'", *entry.classes);
      }
    }
    frame.class_of_instance = std::move(classes);
  }
  try {
    frame.validate();
  } catch (const InvalidInput& e) {
    throw fail(e.what(), entry.rgb.parent_path());
  }
  return frame;
}

FrameEntry save_frame(const RgbdFrame& frame, const fs::path& root, const DepthEncoding& encoding) {
  frame.validate();
  if (frame.instance_gt) {
    for (std::int32_t id : frame.instance_gt->data()) {
      if (id > 65535) throw InvalidInput("frame '" + frame.frame_id + "': instance ids exceed the 16-bit id space");
    }
  }
  fs::create_directories(root);
  const int h = frame.rows();
  const int w = frame.cols();

  std::vector<std::uint16_t> rgb(frame.rgb.data().size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    rgb[i] = static_cast<std::uint16_t>(std::lround(frame.rgb.data()[i] * 255.0));
  }
  write_png(FramePaths::rgb(root, frame.frame_id), h, w, 3, 8, rgb);

  std::vector<std::uint16_t> depth(frame.depth.pixel_count(), 0);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!frame.valid[i]) continue;
    const long mm = std::lround(static_cast<double>(frame.depth[i]) * encoding.max_depth_mm);
    // A valid reading never encodes to the invalid sentinel.
    depth[i] = static_cast<std::uint16_t>(std::clamp(mm, 1L, 65535L));
  }
  write_png(FramePaths::depth(root, frame.frame_id), h, w, 1, 16, depth);

  if (frame.instance_gt) save_label_png(*frame.instance_gt, FramePaths::instances(root, frame.frame_id));
  if (frame.class_of_instance) {
    json j = json::object();
    for (const auto& [id, name] : *frame.class_of_instance) j[std::to_string(id)] = name;
    write_json_file(FramePaths::classes(root, frame.frame_id), j);
  }
  return probe_frame(root, frame.frame_id);
}

std::map<int, long> instance_areas(const LabelMap& labels) {
  std::map<int, long> areas;
  for (std::int32_t id : labels.data()) {
    if (id > 0) ++areas[id];
  }
  return areas;
}

FilterResult filter_dataset(const DatasetIndex& index, const FilterOptions& options) {
  FilterResult result;
  result.kept.root = index.root;
  result.kept.seen_classes = index.seen_classes;
  result.kept.unseen_classes = index.unseen_classes;
  for (const auto& entry : index.frames) {
    if (!entry.instances) {
      result.warnings.push_back("frame '" + entry.id + "' has no instance ground truth; skipped");
      continue;
    }
    const LabelMap labels = load_label_png(*entry.instances);
    int big_enough = 0;
    for (const auto& [id, area] : instance_areas(labels)) {
      if (area >= options.min_object_pixels) ++big_enough;
    }
    if (big_enough >= options.min_objects) result.kept.frames.push_back(entry);
  }
  return result;
}

}  // namespace supergbd
