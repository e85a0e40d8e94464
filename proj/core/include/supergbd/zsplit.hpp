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
#include <map>
#include <string>
#include <vector>

#include "supergbd/imagery.hpp"

namespace supergbd {

// Group name -> class names.
using ClassGrouping = std::map<std::string, std::vector<std::string>>;

struct ZeroShotSplit {
  std::vector<std::string> seen;    // sorted
  std::vector<std::string> unseen;  // sorted
  std::uint64_t seed = 0;
};

void validate_grouping(const ClassGrouping& grouping);

// Per group, floor(n / 2) classes drawn without replacement become seen; the
// rest (including the odd one out) are unseen.
ZeroShotSplit stratified_split(const ClassGrouping& grouping, std::uint64_t seed);

ClassGrouping grouping_from_json(const std::string& text);
std::string split_to_json(const ZeroShotSplit& split);
ZeroShotSplit split_from_json(const std::string& text);

inline constexpr const char* kTrainEligible = "train-eligible";
inline constexpr const char* kTestOnly = "test-only";

struct TagCounts {
  int train_eligible = 0;
  int test_only = 0;
  int unlabeled = 0;  // frames without class files
};

// Tags every frame from its class file; throws on classes outside the split.
TagCounts tag_dataset(DatasetIndex& index, const ZeroShotSplit& split);

}  // namespace supergbd
