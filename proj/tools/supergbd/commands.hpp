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
#include <filesystem>
#include <optional>
#include <string>

#include "supergbd/patch_graph.hpp"

namespace supergbd::tools {

namespace fs = std::filesystem;

struct SlicOptions {
  int patches = 128;
  double compactness = 10.0;
  int iterations = 10;
  int min_patch_area = 16;
};

struct SynthOptions {
  fs::path out;
  int train = 200;
  int test = 50;
  std::string seen = "box,cylinder,sphere,wedge";
  std::string unseen = "ring,lbracket";
  std::uint64_t seed = 0;
  int min_objects = 5;
  int max_objects = 25;
  int rows = 256;
  int cols = 256;
  bool no_noise = false;
  int jobs = 1;
};

struct PreprocessOptions {
  fs::path data;
  fs::path out;  // defaults to the dataset root
  std::string split = "all";
  SlicOptions slic;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct TrainOptions {
  fs::path data;
  fs::path out;
  std::string split = "train";
  SlicOptions slic;
  int epochs = 10;
  double lr = 1e-3;
  int lr_step = 3;
  double lr_decay = 0.5;
  int batch = 256;
  std::string pn_ratio = "25/75";
  std::string features = "rgb,xyz,normals";
  std::string hidden = "256,1024,256";
  double dropout = 0.3;
  double validation_fraction = 0.1;
  double threshold = 0.5;
  bool suppress_largest = false;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct InferOptions {
  fs::path data;
  fs::path checkpoint;
  fs::path out;
  std::string split = "test";
  std::string features;  // optional; must agree with the checkpoint manifest
  double threshold = 0.5;
  bool suppress_largest = false;
  int jobs = 1;
};

struct EvalOptions {
  fs::path data;
  fs::path pred;
  fs::path out;
  fs::path report_in;
  std::string split = "test";
  std::string aggregation = "pooled";
  bool gt_as_pred = false;
  int radius = -1;
  int jobs = 1;
};

struct VizOptions {
  fs::path data;
  fs::path pred;
  fs::path out;
  std::string split = "test";
  int jobs = 1;
};

struct SplitOptions {
  fs::path groups;
  fs::path out;
  fs::path data;
  std::uint64_t seed = 0;
};

// "rgb,xyz,normals,implicit" subsets.
FeatureSubset parse_features(const std::string& text);
std::string format_features(const FeatureSubset& subset);
// "25/75" -> 0.25, "0.25" -> 0.25, "natural" -> nullopt.
std::optional<double> parse_pn_ratio(const std::string& text);

int cmd_synth(const SynthOptions& o);
int cmd_preprocess(const PreprocessOptions& o);
int cmd_train(const TrainOptions& o);
int cmd_infer(const InferOptions& o);
int cmd_eval(const EvalOptions& o);
int cmd_viz(const VizOptions& o);
int cmd_split(const SplitOptions& o);

}  // namespace supergbd::tools
