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

#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "render.hpp"
#include "supergbd/checksum.hpp"
#include "supergbd/error.hpp"
#include "supergbd/metrics.hpp"
#include "supergbd/parallel.hpp"
#include "supergbd/pipeline.hpp"
#include "supergbd/synthgen.hpp"
#include "supergbd/tinynet.hpp"
#include "supergbd/zsplit.hpp"

namespace supergbd::tools {

using nlohmann::json;

namespace {

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write '" + path.string() + "'");
}

std::vector<FrameEntry> select_frames(const DatasetIndex& index, const std::string& split) {
  std::vector<FrameEntry> out;
  for (const auto& f : index.frames) {
    if (split == "all" || f.split == split) out.push_back(f);
  }
  if (out.empty()) {
    throw InvalidInput("dataset '" + index.root.string() + "' has no frames in split '" + split + "'");
  }
  return out;
}

SlicConfig slic_config(const SlicOptions& o, std::uint64_t seed) {
  if (std::find(std::begin(kPatchPresets), std::end(kPatchPresets), o.patches) == std::end(kPatchPresets)) {
    throw InvalidInput("--patches must be one of 32, 64, 128, 256 (got " + std::to_string(o.patches) + ")");
  }
  SlicConfig c;
  c.target_patch_count = o.patches;
  c.compactness = o.compactness;
  c.iterations = o.iterations;
  c.min_patch_area = o.min_patch_area;
  c.seed = seed;
  c.validate();
  return c;
}

json slic_json(const SlicConfig& c) {
  return {{"algorithm", c.algorithm},       {"target_patch_count", c.target_patch_count},
          {"compactness", c.compactness},   {"iterations", c.iterations},
          {"min_patch_area", c.min_patch_area}, {"depth_scale", c.depth_scale},
          {"seed", c.seed}};
}

SlicConfig slic_from_json(const json& j) {
  SlicConfig c;
  c.algorithm = j.value("algorithm", c.algorithm);
  c.target_patch_count = j.value("target_patch_count", c.target_patch_count);
  c.compactness = j.value("compactness", c.compactness);
  c.iterations = j.value("iterations", c.iterations);
  c.min_patch_area = j.value("min_patch_area", c.min_patch_area);
  c.depth_scale = j.value("depth_scale", c.depth_scale);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

std::optional<ImplicitFeatures> sidecar_for(const FrameEntry& entry, const FeatureSubset& features) {
  if (!features.implicit) return std::nullopt;
  if (!entry.sidecar) {
    throw InvalidInput("implicit features requested but frame '" + entry.id + "' has no .spxf sidecar");
  }
  return read_sidecar(*entry.sidecar);
}

Preprocessed preprocess_entry(const FrameEntry& entry, const PipelineConfig& config) {
  const RgbdFrame frame = load_frame(entry);
  const auto sidecar = sidecar_for(entry, config.features);
  return preprocess(frame, config, sidecar ? &*sidecar : nullptr);
}

std::vector<Preprocessed> preprocess_all(const std::vector<FrameEntry>& frames, const PipelineConfig& config,
                                         int jobs) {
  std::vector<Preprocessed> out(frames.size());
  parallel_for(frames.size(), jobs, [&](std::size_t i) { out[i] = preprocess_entry(frames[i], config); });
  return out;
}

void print_line(const std::string& s) { std::cout << s << '\n'; }

}  // namespace

FeatureSubset parse_features(const std::string& text) {
  FeatureSubset s{false, false, false, false};
  for (const auto& item : split_list(text)) {
    if (item == "rgb") {
      s.rgb = true;
    } else if (item == "xyz") {
      s.xyz = true;
    } else if (item == "normals") {
      s.normals = true;
    } else if (item == "implicit") {
      s.implicit = true;
    } else {
      throw InvalidInput("unknown feature '" + item + "' (expected rgb, xyz, normals, implicit)");
    }
  }
  if (!s.any()) throw InvalidInput("--features selects nothing");
  return s;
}

std::string format_features(const FeatureSubset& s) {
  std::vector<std::string> parts;
  if (s.rgb) parts.push_back("rgb");
  if (s.xyz) parts.push_back("xyz");
  if (s.normals) parts.push_back("normals");
  if (s.implicit) parts.push_back("implicit");
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

std::optional<double> parse_pn_ratio(const std::string& text) {
  if (text == "natural") return std::nullopt;
  double value = 0.0;
  try {
    const auto slash = text.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      value = std::stod(text, &used);
      if (used != text.size()) throw InvalidInput("");
    } else {
      const std::string ps = text.substr(0, slash), ns = text.substr(slash + 1);
      std::size_t pu = 0, nu = 0;
      const double p = std::stod(ps, &pu), n = std::stod(ns, &nu);
      if (pu != ps.size() || nu != ns.size() || p < 0.0 || n < 0.0 || p + n <= 0.0) throw InvalidInput("");
      value = p / (p + n);
    }
  } catch (const std::exception&) {
    throw InvalidInput("--pn-ratio must look like 25/75, 0.25 or natural (got '" + text + "')");
  }
  if (!(value > 0.0 && value < 1.0)) throw InvalidInput("--pn-ratio must give a positive share in (0, 1)");
  return value;
}

int cmd_synth(const SynthOptions& o) {
  SceneSpec spec;
  spec.seed = o.seed;
  spec.seen = split_list(o.seen);
  spec.unseen = split_list(o.unseen);
  spec.min_objects = o.min_objects;
  spec.max_objects = o.max_objects;
  spec.rows = o.rows;
  spec.cols = o.cols;
  if (o.no_noise) spec = spec.without_noise();
  const DatasetIndex index = generate_benchmark(spec, o.train, o.test, o.out, o.jobs);
  print_line("wrote " + std::to_string(index.frames.size()) + " frames to " + o.out.string() + " (train " +
             std::to_string(o.train) + ", test " + std::to_string(o.test) + ")");
  print_line("seen: " + o.seen + "  unseen: " + o.unseen);
  return 0;
}

int cmd_preprocess(const PreprocessOptions& o) {
  const DatasetIndex index = open_dataset(o.data);
  const auto frames = select_frames(index, o.split);
  PipelineConfig config;
  config.slic = slic_config(o.slic, o.seed);
  const fs::path out = o.out.empty() ? o.data : o.out;
  fs::create_directories(out);
  std::vector<int> counts(frames.size());
  parallel_for(frames.size(), o.jobs, [&](std::size_t i) {
    const RgbdFrame frame = load_frame(frames[i]);
    const SuperpixelMap map =
        combine_maps(slic_rgb(frame, config.slic), slic_depth(frame, config.slic), config.slic.min_patch_area);
    save_superpixel_map(map, out / (frames[i].id + "_spx.png"), out / (frames[i].id + "_spx.json"), config.slic);
    counts[i] = map.patch_count;
  });
  double mean = 0.0;
  for (int c : counts) mean += c;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "preprocessed %zu frames into %s (mean %.1f patches per frame)", frames.size(),
                out.string().c_str(), mean / static_cast<double>(frames.size()));
  print_line(buf);
  return 0;
}

int cmd_train(const TrainOptions& o) {
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.learning_rate = o.lr;
  tc.lr_step_epochs = o.lr_step;
  tc.lr_decay = o.lr_decay;
  tc.batch_size = o.batch;
  tc.target_positive_fraction = parse_pn_ratio(o.pn_ratio);
  tc.seed = o.seed;
  tc.features = parse_features(o.features);
  tc.hidden.clear();
  for (const auto& h : split_list(o.hidden)) {
    try {
      tc.hidden.push_back(std::stoi(h));
    } catch (const std::exception&) {
      throw InvalidInput("--hidden must be a comma-separated list of sizes (got '" + o.hidden + "')");
    }
  }
  tc.dropout_rate = static_cast<float>(o.dropout);
  tc.validation_fraction = o.validation_fraction;
  tc.validate();

  PipelineConfig config;
  config.slic = slic_config(o.slic, o.seed);
  config.features = tc.features;
  config.threshold = o.threshold;
  config.suppress_largest = o.suppress_largest;
  config.validate();

  const DatasetIndex index = open_dataset(o.data);
  const auto frames = select_frames(index, o.split);
  for (const auto& f : frames) {
    if (!f.instances) throw InvalidInput("training frame '" + f.id + "' has no instance ground truth");
    sidecar_for(f, config.features);
  }
  const std::vector<Preprocessed> corpus = preprocess_all(frames, config, o.jobs);
  const CorpusTrainResult result = train_on_corpus(corpus, tc, config);

  fs::create_directories(o.out);
  const std::vector<std::uint8_t> bytes = save_checkpoint(result.train.model);
  write_file_bytes(o.out / "model.sgbd", bytes);

  std::vector<PatchGraph> graphs;
  for (const auto& p : corpus) graphs.push_back(p.graph);
  json manifest;
  manifest["checkpoint"] = "model.sgbd";
  manifest["crc32"] = crc32_hex(bytes);
  manifest["features"] = format_features(tc.features);
  manifest["implicit_dim"] = corpus.front().graph.implicit_dim();
  manifest["dims"] = result.train.model.dims();
  manifest["parameter_count"] = result.train.model.parameter_count();
  manifest["slic"] = slic_json(config.slic);
  manifest["threshold"] = config.threshold;
  manifest["suppress_largest"] = config.suppress_largest;
  manifest["train"] = {{"epochs", tc.epochs},
                       {"learning_rate", tc.learning_rate},
                       {"lr_step_epochs", tc.lr_step_epochs},
                       {"lr_decay", tc.lr_decay},
                       {"batch_size", tc.batch_size},
                       {"pn_ratio", o.pn_ratio},
                       {"hidden", tc.hidden},
                       {"dropout", tc.dropout_rate},
                       {"validation_fraction", tc.validation_fraction},
                       {"seed", tc.seed}};
  manifest["training_frames"] = frames.size() - result.validation_frames.size();
  manifest["validation_frames"] = result.validation_frames;
  manifest["corpus_positive_fraction"] = corpus_positive_fraction(graphs);
  manifest["best_epoch"] = result.train.best_epoch;
  write_text(o.out / "model.json", manifest.dump(2) + "\n");

  std::ostringstream text;
  json log = json::array();
  for (const auto& e : result.train.log) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch %2d  steps %5d  loss %.6f  lr %.6g", e.epoch, e.steps, e.mean_loss,
                  e.learning_rate);
    text << buf;
    json entry = {{"epoch", e.epoch}, {"steps", e.steps}, {"mean_loss", e.mean_loss}, {"learning_rate", e.learning_rate}};
    if (e.validation_f) {
      std::snprintf(buf, sizeof(buf), "  val_overlap_f %.2f", *e.validation_f);
      text << buf;
      entry["validation_overlap_f"] = *e.validation_f;
    }
    text << (e.epoch == result.train.best_epoch ? "  *\n" : "\n");
    log.push_back(std::move(entry));
  }
  write_text(o.out / "train_log.txt", text.str());
  write_text(o.out / "train_log.json", json{{"best_epoch", result.train.best_epoch}, {"epochs", log}}.dump(2) + "\n");
  std::cout << text.str();
  print_line("checkpoint " + (o.out / "model.sgbd").string() + " (" + std::to_string(bytes.size()) + " bytes, crc32 " +
             crc32_hex(bytes) + ", best epoch " + std::to_string(result.train.best_epoch) + ")");
  return 0;
}

int cmd_infer(const InferOptions& o) {
  fs::path manifest_path = o.checkpoint;
  manifest_path.replace_extension(".json");
  if (!fs::exists(manifest_path)) {
    throw InvalidInput("checkpoint manifest '" + manifest_path.string() + "' not found");
  }
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw Error("checkpoint manifest: " + std::string(e.what()));
  }
  const std::vector<std::uint8_t> bytes = read_file_bytes(o.checkpoint);
  const std::string hash = crc32_hex(bytes);
  if (manifest.value("crc32", hash) != hash) {
    throw Error("checkpoint '" + o.checkpoint.string() + "' does not match its manifest checksum");
  }
  const MlpModel model = load_checkpoint(bytes);

  PipelineConfig config;
  config.features = parse_features(manifest.at("features").get<std::string>());
  if (!o.features.empty() && !(parse_features(o.features) == config.features)) {
    throw InvalidInput("--features " + o.features + " differs from the checkpoint's " + format_features(config.features));
  }
  config.slic = slic_from_json(manifest.at("slic"));
  config.threshold = o.threshold;
  config.suppress_largest = o.suppress_largest;
  config.checkpoint = o.checkpoint;
  config.validate();

  const DatasetIndex index = open_dataset(o.data);
  const auto frames = select_frames(index, o.split);
  fs::create_directories(o.out);
  std::vector<int> segments(frames.size());
  parallel_for(frames.size(), o.jobs, [&](std::size_t i) {
    const RgbdFrame frame = load_frame(frames[i]);
    const auto sidecar = sidecar_for(frames[i], config.features);
    const InstancePrediction pred = infer(frame, model, config, sidecar ? &*sidecar : nullptr);
    save_prediction(pred, o.out, frames[i].id, config.threshold, hash);
    segments[i] = pred.segment_count();
  });
  double mean = 0.0;
  for (int s : segments) mean += s;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "predicted %zu frames into %s (mean %.1f segments per frame)", frames.size(),
                o.out.string().c_str(), mean / static_cast<double>(frames.size()));
  print_line(buf);
  return 0;
}

int cmd_eval(const EvalOptions& o) {
  SegEvalReport report;
  fs::path out = o.out;
  if (!o.report_in.empty()) {
    report = SegEvalReport::from_json(read_text(o.report_in));
  } else {
    if (o.data.empty()) throw InvalidInput("--data is required unless --report-in is given");
    if (o.pred.empty() && !o.gt_as_pred) throw InvalidInput("--pred is required unless --gt-as-pred is given");
    Aggregation aggregation;
    if (o.aggregation == "pooled") {
      aggregation = Aggregation::kPooledObjects;
    } else if (o.aggregation == "per-image") {
      aggregation = Aggregation::kPerImageMean;
    } else {
      throw InvalidInput("--aggregation must be pooled or per-image");
    }
    const DatasetIndex index = open_dataset(o.data);
    if (index.seen_classes.empty() && index.unseen_classes.empty()) {
      throw InvalidInput("dataset manifest lists no seen/unseen classes");
    }
    const auto frames = select_frames(index, o.split);
    std::vector<ImageEvaluation> evals(frames.size());
    parallel_for(frames.size(), o.jobs, [&](std::size_t i) {
      const RgbdFrame frame = load_frame(frames[i]);
      if (!frame.instance_gt || !frame.class_of_instance) {
        throw InvalidInput("frame '" + frames[i].id + "' lacks instance or class ground truth");
      }
      const LabelMap pred =
          o.gt_as_pred ? *frame.instance_gt : load_label_png(o.pred / (frames[i].id + "_pred.png"));
      const int radius = o.radius >= 0 ? o.radius : default_boundary_radius(frame.rows());
      evals[i] = evaluate_image(pred, *frame.instance_gt, &*frame.class_of_instance, radius, frames[i].id);
    });
    const std::set<std::string> seen(index.seen_classes.begin(), index.seen_classes.end());
    const std::set<std::string> unseen(index.unseen_classes.begin(), index.unseen_classes.end());
    report = zero_shot_aggregate(evals, seen, unseen, aggregation);
    if (out.empty()) out = (o.gt_as_pred ? o.data : o.pred) / "eval_report.json";
  }
  const std::string table = report.to_table();
  std::cout << table;
  if (!out.empty()) {
    write_text(out, report.to_json() + "\n");
    fs::path table_path = out;
    table_path.replace_extension(".txt");
    write_text(table_path, table);
  }
  return 0;
}

int cmd_viz(const VizOptions& o) {
  const DatasetIndex index = open_dataset(o.data);
  const auto frames = select_frames(index, o.split);
  fs::create_directories(o.out);
  parallel_for(frames.size(), o.jobs, [&](std::size_t i) {
    const RgbdFrame frame = load_frame(frames[i]);
    const LabelMap pred = load_label_png(o.pred / (frames[i].id + "_pred.png"));
    if (!pred.same_size(frame.depth)) {
      throw InvalidInput("prediction for frame '" + frames[i].id + "' does not match the frame size");
    }
    write_rgb8(render_overlay(frame, pred), o.out / (frames[i].id + "_overlay.png"));
    write_rgb8(render_panels(frame, pred), o.out / (frames[i].id + "_panels.png"));
  });
  print_line("wrote overlays for " + std::to_string(frames.size()) + " frames to " + o.out.string());
  return 0;
}

int cmd_split(const SplitOptions& o) {
  const ClassGrouping grouping = grouping_from_json(read_text(o.groups));
  const ZeroShotSplit split = stratified_split(grouping, o.seed);
  const std::string text = split_to_json(split) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_text(o.out, text);
  }
  if (!o.data.empty()) {
    DatasetIndex index = open_dataset(o.data);
    const TagCounts counts = tag_dataset(index, split);
    write_manifest(index);
    print_line("tagged " + std::to_string(counts.train_eligible) + " train-eligible, " +
               std::to_string(counts.test_only) + " test-only, " + std::to_string(counts.unlabeled) +
               " unlabeled frames");
  }
  print_line("seen " + std::to_string(split.seen.size()) + " classes, unseen " + std::to_string(split.unseen.size()));
  return 0;
}

}  // namespace supergbd::tools
