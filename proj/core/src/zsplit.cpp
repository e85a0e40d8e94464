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

#include "supergbd/zsplit.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/random.hpp"

namespace supergbd {

using nlohmann::json;

void validate_grouping(const ClassGrouping& grouping) {
  if (grouping.empty()) throw InvalidInput("class grouping is empty");
  std::set<std::string> seen_names;
  for (const auto& [group, classes] : grouping) {
    if (classes.size() < 2) {
      throw InvalidInput("group '" + group + "' has " + std::to_string(classes.size()) + " classes; at least 2 needed");
    }
    for (const auto& c : classes) {
      if (!seen_names.insert(c).second) throw InvalidInput("class '" + c + "' appears more than once");
    }
  }
}

ZeroShotSplit stratified_split(const ClassGrouping& grouping, std::uint64_t seed) {
  validate_grouping(grouping);
  ZeroShotSplit split;
  split.seed = seed;
  Rng rng(seed);
  // std::map iterates groups by name, so the draw order is fixed.
  for (const auto& [group, classes] : grouping) {
    std::vector<std::string> order = classes;
    std::sort(order.begin(), order.end());
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }
    const std::size_t half = order.size() / 2;
    split.seen.insert(split.seen.end(), order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
    split.unseen.insert(split.unseen.end(), order.begin() + static_cast<std::ptrdiff_t>(half), order.end());
  }
  std::sort(split.seen.begin(), split.seen.end());
  std::sort(split.unseen.begin(), split.unseen.end());
  return split;
}

ClassGrouping grouping_from_json(const std::string& text) {
  ClassGrouping grouping;
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw InvalidInput("class grouping must be a JSON object of group -> [classes]");
    for (const auto& [group, classes] : j.items()) grouping[group] = classes.get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw InvalidInput("class grouping: " + std::string(e.what()));
  }
  validate_grouping(grouping);
  return grouping;
}

std::string split_to_json(const ZeroShotSplit& split) {
  const json j = {{"seen", split.seen}, {"unseen", split.unseen}, {"seed", split.seed}};
  return j.dump(2);
}

ZeroShotSplit split_from_json(const std::string& text) {
  ZeroShotSplit split;
  try {
    const json j = json::parse(text);
    split.seen = j.at("seen").get<std::vector<std::string>>();
    split.unseen = j.at("unseen").get<std::vector<std::string>>();
    split.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw InvalidInput("zero-shot split: " + std::string(e.what()));
  }
  for (const auto& c : split.seen) {
    if (std::find(split.unseen.begin(), split.unseen.end(), c) != split.unseen.end()) {
      throw InvalidInput("class '" + c + "' is both seen and unseen");
    }
  }
  return split;
}

TagCounts tag_dataset(DatasetIndex& index, const ZeroShotSplit& split) {
  const std::set<std::string> seen(split.seen.begin(), split.seen.end());
  const std::set<std::string> unseen(split.unseen.begin(), split.unseen.end());
  TagCounts counts;
  for (auto& frame : index.frames) {
    if (!frame.classes) {
      frame.tag.clear();
      ++counts.unlabeled;
      continue;
    }
    std::ifstream in(*frame.classes, std::ios::binary);
    if (!in) throw Error("frame '" + frame.id + "': cannot open '" + frame.classes->string() + "'");
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error("frame '" + frame.id + "': " + e.what());
    }
    bool any_unseen = false;
    for (const auto& [id, name_value] : j.items()) {
      const std::string name = name_value.get<std::string>();
      if (unseen.contains(name)) {
        any_unseen = true;
      } else if (!seen.contains(name)) {
        throw InvalidInput("frame '" + frame.id + "': class '" + name + "' is not part of the split");
      }
    }
    frame.tag = any_unseen ? kTestOnly : kTrainEligible;
    ++(any_unseen ? counts.test_only : counts.train_eligible);
  }
  index.seen_classes = split.seen;
  index.unseen_classes = split.unseen;
  return counts;
}

}  // namespace supergbd
