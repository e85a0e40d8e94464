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

#include <Eigen/Core>

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "supergbd/image.hpp"

namespace supergbd {

// Object ids, areas and pairwise intersections of a prediction against
// ground truth. Id 0 is background and excluded on both sides.
struct OverlapTable {
  std::vector<int> gt_ids;        // ascending
  std::vector<int> pred_ids;      // ascending
  std::vector<long> gt_area;
  std::vector<long> pred_area;
  Eigen::MatrixXd intersection;   // G x S pixel counts
  Eigen::MatrixXd f;              // G x S, 2|s n g| / (|s| + |g|)
};

OverlapTable overlap_table(const LabelMap& pred, const LabelMap& gt);
Eigen::MatrixXd pairwise_f_matrix(const LabelMap& pred, const LabelMap& gt);

struct Match {
  int gt = 0;    // row index
  int pred = 0;  // column index
  double f = 0.0;
};

struct MatchResult {
  std::vector<Match> matches;
  std::vector<int> unmatched_gt;
  std::vector<int> unmatched_pred;

  double total_f() const;
};

// Maximum-total-F one-to-one matching; zero-F pairs are left unmatched.
MatchResult hungarian_match(const Eigen::MatrixXd& f_matrix);

// Precision/recall/F as percentages; F = 0 when P + R = 0.
struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

Prf make_prf(double true_positive_pred, double pred_total, double true_positive_gt, double gt_total);
double harmonic_mean(double seen, double unseen);

Prf overlap_prf(const OverlapTable& table, const MatchResult& match);
Prf overlap_prf(const LabelMap& pred, const LabelMap& gt, const MatchResult& match);

// Pixels of `mask` (label == id) with at least one in-image 4-neighbour outside.
Mask object_boundary(const LabelMap& labels, int id);
Mask dilate_disk(const Mask& mask, int radius);

// Dilation radius: 2 px at 480 rows, scaled with image height (minimum 1).
int default_boundary_radius(int rows);

Prf boundary_prf(const LabelMap& pred, const LabelMap& gt, const MatchResult& match, int dilation_radius);

struct GtObjectResult {
  int id = 0;
  std::string class_name;
  long area = 0;
  long boundary = 0;
  int matched_pred = 0;  // predicted id, 0 when unmatched
  long overlap_tp = 0;
  long boundary_tp = 0;  // gt boundary pixels inside the dilated predicted boundary
};

struct PredObjectResult {
  int id = 0;
  long area = 0;
  long boundary = 0;
  int matched_gt = 0;
  long overlap_tp = 0;
  long boundary_tp = 0;  // predicted boundary pixels inside the dilated gt boundary
  int max_overlap_gt = 0;  // gt id with the largest intersection, 0 if none
};

struct ImageEvaluation {
  std::string frame_id;
  std::vector<GtObjectResult> gt;
  std::vector<PredObjectResult> pred;

  Prf overlap() const;
  Prf boundary() const;
};

ImageEvaluation evaluate_image(const LabelMap& pred, const LabelMap& gt,
                               const std::map<int, std::string>* class_of_instance, int dilation_radius,
                               std::string frame_id = {});

enum class Aggregation { kPooledObjects, kPerImageMean };

struct SplitScores {
  Prf overlap;
  Prf boundary;
  int objects = 0;
};

struct ImageScores {
  std::string frame_id;
  Prf overlap;
  Prf boundary;
  int gt_objects = 0;
  int pred_objects = 0;
};

struct SegEvalReport {
  Aggregation aggregation = Aggregation::kPooledObjects;
  SplitScores all;
  SplitScores seen;
  SplitScores unseen;
  SplitScores harmonic;
  std::vector<ImageScores> per_image;

  std::string to_json() const;
  std::string to_table() const;
  // Reads seen/unseen (and optionally all) scores in the to_json layout and
  // recomputes the harmonic mean; per-image entries are ignored.
  static SegEvalReport from_json(const std::string& text);
};

// Metric-wise harmonic mean of two split scores.
SplitScores harmonic_scores(const SplitScores& seen, const SplitScores& unseen);

// Pooled scores over every object of every image, ignoring classes.
SplitScores pooled_scores(std::span<const ImageEvaluation> images);

// Accumulates per-object results into seen/unseen/all splits. Matched
// predictions follow their gt partner's split, unmatched ones the split of
// their largest-overlap gt object, and predictions touching no gt object
// count against both splits' precision.
SegEvalReport zero_shot_aggregate(std::span<const ImageEvaluation> images, const std::set<std::string>& seen,
                                  const std::set<std::string>& unseen,
                                  Aggregation aggregation = Aggregation::kPooledObjects);

}  // namespace supergbd
