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

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "supergbd/error.hpp"
#include "supergbd/parallel.hpp"

using namespace supergbd;
using namespace supergbd::tools;
using nlohmann::json;

namespace {

// Options of one subcommand that a --config file may set, keyed by long name.
// A value supplied by the config file satisfies a required option.
using Setters = std::map<std::string, std::function<void(const json&)>>;

template <typename T>
CLI::Option* add_opt(CLI::App* app, Setters& setters, const std::string& name, T& value, const std::string& help) {
  CLI::Option* opt = app->add_option("--" + name, value, help)->capture_default_str();
  setters[name] = [&value, opt](const json& j) {
    if constexpr (std::is_same_v<T, fs::path>) {
      value = j.get<std::string>();
    } else {
      value = j.get<T>();
    }
    opt->required(false);
  };
  return opt;
}

CLI::Option* add_flag_opt(CLI::App* app, Setters& setters, const std::string& name, bool& value, const std::string& help) {
  setters[name] = [&value](const json& j) { value = j.get<bool>(); };
  return app->add_flag("--" + name, value, help);
}

void add_slic(CLI::App* app, Setters& setters, SlicOptions& o) {
  add_opt(app, setters, "patches", o.patches, "Superpixel target count per map: 32, 64, 128 or 256");
  add_opt(app, setters, "compactness", o.compactness, "SLIC compactness");
  add_opt(app, setters, "iterations", o.iterations, "SLIC iterations");
  add_opt(app, setters, "min-patch-area", o.min_patch_area, "Combined-map patches smaller than this are absorbed");
}


// Applies keys from the --config file: top-level keys to whichever
// subcommand defines them, nested objects to the named subcommand only.
void apply_config(const std::string& path, const std::map<std::string, Setters>& all, const std::string& command) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidInput("config file '" + path + "': " + e.what());
  }
  if (!j.is_object()) throw InvalidInput("config file must hold a JSON object");
  const Setters& mine = all.at(command);
  auto apply = [&](const std::string& key, const json& value) {
    try {
      mine.at(key)(value);
    } catch (const json::exception& e) {
      throw InvalidInput("config key '" + key + "': " + e.what());
    }
  };
  for (const auto& [key, value] : j.items()) {
    if (all.contains(key) && value.is_object()) {
      if (key != command) continue;
      for (const auto& [k, v] : value.items()) {
        if (!mine.contains(k)) throw InvalidInput("config key '" + command + "." + k + "' is not an option of " + command);
        apply(k, v);
      }
      continue;
    }
    bool known = false;
    for (const auto& [name, setters] : all) known = known || setters.contains(key);
    if (!known) throw InvalidInput("unknown config key '" + key + "'");
    if (mine.contains(key)) apply(key, value);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot RGB-D instance segmentation by learned superpixel merging"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with option values; command-line flags take precedence");

  const int jobs = default_jobs();
  std::map<std::string, Setters> setters;
  std::map<std::string, std::uint64_t*> seeds;

  SynthOptions synth;
  synth.jobs = jobs;
  auto* s = app.add_subcommand("synth", "Generate a synthetic table-top benchmark");
  auto& ss = setters["synth"];
  add_opt(s, ss, "out", synth.out, "Output dataset directory")->required();
  add_opt(s, ss, "train", synth.train, "Number of train frames")->check(CLI::PositiveNumber);
  add_opt(s, ss, "test", synth.test, "Number of test frames")->check(CLI::PositiveNumber);
  add_opt(s, ss, "seen", synth.seen, "Comma-separated seen shape families");
  add_opt(s, ss, "unseen", synth.unseen, "Comma-separated unseen shape families");
  add_opt(s, ss, "seed", synth.seed, "Benchmark seed (falls back to SUPERGBD_SEED)");
  add_opt(s, ss, "min-objects", synth.min_objects, "Minimum objects per scene")->check(CLI::PositiveNumber);
  add_opt(s, ss, "max-objects", synth.max_objects, "Maximum objects per scene")->check(CLI::PositiveNumber);
  add_opt(s, ss, "rows", synth.rows, "Image height")->check(CLI::Range(32, 4096));
  add_opt(s, ss, "cols", synth.cols, "Image width")->check(CLI::Range(32, 4096));
  add_flag_opt(s, ss, "no-noise", synth.no_noise, "Disable depth noise, dropout and colour texture");
  add_opt(s, ss, "jobs", synth.jobs, "Worker threads")->check(CLI::PositiveNumber);
  seeds["synth"] = &synth.seed;

  PreprocessOptions pre;
  pre.jobs = jobs;
  auto* p = app.add_subcommand("preprocess", "Write combined superpixel maps (<id>_spx.png/.json)");
  auto& ps = setters["preprocess"];
  add_opt(p, ps, "data", pre.data, "Dataset directory")->required();
  add_opt(p, ps, "out", pre.out, "Output directory (default: the dataset directory)");
  add_opt(p, ps, "split", pre.split, "Frames to process: train, test or all");
  add_slic(p, ps, pre.slic);
  add_opt(p, ps, "seed", pre.seed, "Seed recorded with the superpixel config");
  add_opt(p, ps, "jobs", pre.jobs, "Worker threads")->check(CLI::PositiveNumber);
  seeds["preprocess"] = &pre.seed;

  TrainOptions train;
  train.jobs = jobs;
  auto* t = app.add_subcommand("train", "Train the edge-merging network");
  auto& ts = setters["train"];
  add_opt(t, ts, "data", train.data, "Dataset directory")->required();
  add_opt(t, ts, "out", train.out, "Directory for model.sgbd, model.json and train_log.*")->required();
  add_opt(t, ts, "split", train.split, "Frames to train on");
  add_slic(t, ts, train.slic);
  add_opt(t, ts, "epochs", train.epochs, "Training epochs")->check(CLI::PositiveNumber);
  add_opt(t, ts, "lr", train.lr, "Initial learning rate");
  add_opt(t, ts, "lr-step", train.lr_step, "Epochs between learning-rate decays")->check(CLI::PositiveNumber);
  add_opt(t, ts, "lr-decay", train.lr_decay, "Learning-rate decay factor");
  add_opt(t, ts, "batch", train.batch, "Batch size")->check(CLI::PositiveNumber);
  add_opt(t, ts, "pn-ratio", train.pn_ratio, "Positive/negative batch ratio, e.g. 25/75, 50/50, 80/20 or natural");
  add_opt(t, ts, "features", train.features, "Comma-separated subset of rgb,xyz,normals,implicit");
  add_opt(t, ts, "hidden", train.hidden, "Comma-separated hidden layer sizes");
  add_opt(t, ts, "dropout", train.dropout, "Dropout rate on hidden layers");
  add_opt(t, ts, "validation-fraction", train.validation_fraction, "Share of frames held out for checkpoint selection");
  add_opt(t, ts, "threshold", train.threshold, "Merge threshold used for validation");
  add_flag_opt(t, ts, "suppress-largest", train.suppress_largest, "Drop the largest segment during validation");
  add_opt(t, ts, "seed", train.seed, "Training seed (falls back to SUPERGBD_SEED)");
  add_opt(t, ts, "jobs", train.jobs, "Worker threads for preprocessing")->check(CLI::PositiveNumber);
  seeds["train"] = &train.seed;

  InferOptions inf;
  inf.jobs = jobs;
  auto* i = app.add_subcommand("infer", "Predict instance maps (<id>_pred.png/.json)");
  auto& is = setters["infer"];
  add_opt(i, is, "data", inf.data, "Dataset directory")->required();
  add_opt(i, is, "checkpoint", inf.checkpoint, "Checkpoint (.sgbd) with its .json manifest alongside")->required();
  add_opt(i, is, "out", inf.out, "Prediction directory")->required();
  add_opt(i, is, "split", inf.split, "Frames to predict: train, test or all");
  add_opt(i, is, "features", inf.features, "Expected feature subset; must match the checkpoint");
  add_opt(i, is, "threshold", inf.threshold, "Merge edges with probability >= threshold");
  add_flag_opt(i, is, "suppress-largest", inf.suppress_largest, "Drop the largest segment (usually the table)");
  add_opt(i, is, "jobs", inf.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvalOptions ev;
  ev.jobs = jobs;
  auto* e = app.add_subcommand("eval", "Score predictions: overlap and boundary P/R/F, seen/unseen/HM");
  auto& es = setters["eval"];
  add_opt(e, es, "data", ev.data, "Dataset directory");
  add_opt(e, es, "pred", ev.pred, "Prediction directory");
  add_opt(e, es, "out", ev.out, "Report JSON path (table written next to it as .txt)");
  add_opt(e, es, "report-in", ev.report_in, "Recompute the harmonic mean of an existing report");
  add_opt(e, es, "split", ev.split, "Frames to evaluate");
  add_opt(e, es, "aggregation", ev.aggregation, "pooled or per-image");
  add_flag_opt(e, es, "gt-as-pred", ev.gt_as_pred, "Score the ground truth against itself");
  add_opt(e, es, "radius", ev.radius, "Boundary dilation radius in pixels (default scales with height)");
  add_opt(e, es, "jobs", ev.jobs, "Worker threads")->check(CLI::PositiveNumber);

  VizOptions viz;
  viz.jobs = jobs;
  auto* v = app.add_subcommand("viz", "Write <id>_overlay.png and <id>_panels.png");
  auto& vs = setters["viz"];
  add_opt(v, vs, "data", viz.data, "Dataset directory")->required();
  add_opt(v, vs, "pred", viz.pred, "Prediction directory")->required();
  add_opt(v, vs, "out", viz.out, "Output directory")->required();
  add_opt(v, vs, "split", viz.split, "Frames to render");
  add_opt(v, vs, "jobs", viz.jobs, "Worker threads")->check(CLI::PositiveNumber);

  SplitOptions sp;
  auto* z = app.add_subcommand("split", "Stratified seen/unseen class split from a grouping file");
  auto& zs = setters["split"];
  add_opt(z, zs, "groups", sp.groups, "JSON object: group -> [class names]")->required();
  add_opt(z, zs, "out", sp.out, "Write the split JSON here (default: stdout)");
  add_opt(z, zs, "data", sp.data, "Dataset whose manifest gets the split and frame tags");
  add_opt(z, zs, "seed", sp.seed, "Split seed (falls back to SUPERGBD_SEED)");
  seeds["split"] = &sp.seed;

  // Config and seed fallbacks become defaults before the command line is parsed.
  try {
    std::string command;
    std::string pre_config;
    for (int a = 1; a < argc; ++a) {
      const std::string arg = argv[a];
      if (arg == "--config" && a + 1 < argc) {
        pre_config = argv[++a];
      } else if (arg.rfind("--config=", 0) == 0) {
        pre_config = arg.substr(9);
      } else if (command.empty() && setters.contains(arg)) {
        command = arg;
      }
    }
    if (!command.empty()) {
      if (const char* env = std::getenv("SUPERGBD_SEED"); env != nullptr && seeds.contains(command)) {
        try {
          std::size_t used = 0;
          const unsigned long long value = std::stoull(env, &used);
          if (used != std::string(env).size()) throw std::invalid_argument(env);
          *seeds[command] = value;
        } catch (const std::exception&) {
          throw InvalidInput("SUPERGBD_SEED must be a non-negative integer");
        }
      }
      if (!pre_config.empty()) apply_config(pre_config, setters, command);
    }
  } catch (const InvalidInput& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n\n";
    const auto selected = app.get_subcommands();
    std::cerr << (selected.empty() ? app.help() : selected.front()->help());
    return 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "synth") return cmd_synth(synth);
    if (name == "preprocess") return cmd_preprocess(pre);
    if (name == "train") return cmd_train(train);
    if (name == "infer") return cmd_infer(inf);
    if (name == "eval") return cmd_eval(ev);
    if (name == "viz") return cmd_viz(viz);
    if (name == "split") return cmd_split(sp);
  } catch (const InvalidInput& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}
