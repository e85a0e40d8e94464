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

#include "supergbd/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "supergbd/error.hpp"
#include "supergbd/hungarian.hpp"

namespace supergbd {

OverlapTable overlap_table(const LabelMap& pred, const LabelMap& gt) {
  if (!pred.same_size(gt)) throw InvalidInput("prediction and ground truth differ in size");
  std::map<int, long> gt_area, pred_area;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (gt[i] > 0) ++gt_area[gt[i]];
    if (pred[i] > 0) ++pred_area[pred[i]];
  }
  OverlapTable table;
  std::unordered_map<int, int> gt_index, pred_index;
  for (const auto& [id, area] : gt_area) {
    gt_index[id] = static_cast<int>(table.gt_ids.size());
    table.gt_ids.push_back(id);
    table.gt_area.push_back(area);
  }
  for (const auto& [id, area] : pred_area) {
    pred_index[id] = static_cast<int>(table.pred_ids.size());
    table.pred_ids.push_back(id);
    table.pred_area.push_back(area);
  }
  const auto g = static_cast<Eigen::Index>(table.gt_ids.size());
  const auto s = static_cast<Eigen::Index>(table.pred_ids.size());
  table.intersection = Eigen::MatrixXd::Zero(g, s);
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (gt[i] > 0 && pred[i] > 0) table.intersection(gt_index[gt[i]], pred_index[pred[i]]) += 1.0;
  }
  table.f = Eigen::MatrixXd::Zero(g, s);
  for (Eigen::Index j = 0; j < g; ++j) {
    for (Eigen::Index k = 0; k < s; ++k) {
      table.f(j, k) = 2.0 * table.intersection(j, k) / static_cast<double>(table.gt_area[j] + table.pred_area[k]);
    }
  }
  return table;
}

Eigen::MatrixXd pairwise_f_matrix(const LabelMap& pred, const LabelMap& gt) { return overlap_table(pred, gt).f; }

double MatchResult::total_f() const {
  double total = 0.0;
  for (const auto& m : matches) total += m.f;
  return total;
}

MatchResult hungarian_match(const Eigen::MatrixXd& f_matrix) {
  const auto g = f_matrix.rows();
  const auto s = f_matrix.cols();
  MatchResult result;
  if ((f_matrix.array() < 0.0).any() || !f_matrix.allFinite()) {
    throw InvalidInput("hungarian_match: matrix must be finite and non-negative");
  }
  const auto n = std::max(g, s);
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  cost.topLeftCorner(g, s) = -f_matrix;
  const std::vector<int> assignment = solve_assignment(cost);
  std::vector<bool> pred_used(s, false);
  for (Eigen::Index j = 0; j < g; ++j) {
    const int k = assignment[j];
    if (k < s && f_matrix(j, k) > 0.0) {
      result.matches.push_back(Match{static_cast<int>(j), k, f_matrix(j, k)});
      pred_used[k] = true;
    } else {
      result.unmatched_gt.push_back(static_cast<int>(j));
    }
  }
  for (Eigen::Index k = 0; k < s; ++k) {
    if (!pred_used[k]) result.unmatched_pred.push_back(static_cast<int>(k));
  }
  return result;
}

Prf make_prf(double true_positive_pred, double pred_total, double true_positive_gt, double gt_total) {
  Prf out;
  out.precision = pred_total > 0.0 ? 100.0 * true_positive_pred / pred_total : 0.0;
  out.recall = gt_total > 0.0 ? 100.0 * true_positive_gt / gt_total : 0.0;
  const double sum = out.precision + out.recall;
  out.f = sum > 0.0 ? 2.0 * out.precision * out.recall / sum : 0.0;
  return out;
}

double harmonic_mean(double seen, double unseen) {
  const double sum = seen + unseen;
  return sum > 0.0 ? 2.0 * seen * unseen / sum : 0.0;
}

Prf overlap_prf(const OverlapTable& table, const MatchResult& match) {
  double tp = 0.0;
  for (const auto& m : match.matches) tp += table.intersection(m.gt, m.pred);
  double pred_total = 0.0, gt_total = 0.0;
  for (long a : table.pred_area) pred_total += static_cast<double>(a);
  for (long a : table.gt_area) gt_total += static_cast<double>(a);
  return make_prf(tp, pred_total, tp, gt_total);
}

Prf overlap_prf(const LabelMap& pred, const LabelMap& gt, const MatchResult& match) {
  return overlap_prf(overlap_table(pred, gt), match);
}

Mask object_boundary(const LabelMap& labels, int id) {
  Mask out(labels.rows(), labels.cols());
  for (int r = 0; r < labels.rows(); ++r) {
    for (int c = 0; c < labels.cols(); ++c) {
      if (labels(r, c) != id) continue;
      const bool edge = (labels.in_bounds(r - 1, c) && labels(r - 1, c) != id) ||
                        (labels.in_bounds(r + 1, c) && labels(r + 1, c) != id) ||
                        (labels.in_bounds(r, c - 1) && labels(r, c - 1) != id) ||
                        (labels.in_bounds(r, c + 1) && labels(r, c + 1) != id);
      // An object filling the whole image has no in-image contour; treat a
      // lone pixel as its own boundary.
      const bool isolated = !labels.in_bounds(r - 1, c) && !labels.in_bounds(r + 1, c) &&
                            !labels.in_bounds(r, c - 1) && !labels.in_bounds(r, c + 1);
      out(r, c) = (edge || isolated) ? 1 : 0;
    }
  }
  return out;
}

namespace {

std::vector<std::pair<int, int>> disk_offsets(int radius) {
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -radius; dr <= radius; ++dr) {
    for (int dc = -radius; dc <= radius; ++dc) {
      if (dr * dr + dc * dc <= radius * radius) offsets.emplace_back(dr, dc);
    }
  }
  return offsets;
}

// Boundary pixel lists per object id (id > 0).
std::map<int, std::vector<int>> boundary_pixels(const LabelMap& labels) {
  std::map<int, std::vector<int>> out;
  const int h = labels.rows();
  const int w = labels.cols();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int id = labels(r, c);
      if (id <= 0) continue;
      bool edge = (r > 0 && labels(r - 1, c) != id) || (r + 1 < h && labels(r + 1, c) != id) ||
                  (c > 0 && labels(r, c - 1) != id) || (c + 1 < w && labels(r, c + 1) != id);
      if (h == 1 && w == 1) edge = true;
      if (edge) out[id].push_back(r * w + c);
    }
  }
  return out;
}

// Number of `points` lying within `radius` of any pixel of `reference`.
long count_within(const std::vector<int>& points, const std::vector<int>& reference, int rows, int cols, int radius,
                  std::vector<std::uint8_t>& scratch) {
  if (points.empty() || reference.empty()) return 0;
  scratch.assign(static_cast<std::size_t>(rows) * cols, 0);
  const auto offsets = disk_offsets(radius);
  for (int idx : reference) {
    const int r = idx / cols, c = idx % cols;
    for (const auto& [dr, dc] : offsets) {
      const int rr = r + dr, cc = c + dc;
      if (rr >= 0 && rr < rows && cc >= 0 && cc < cols) scratch[static_cast<std::size_t>(rr) * cols + cc] = 1;
    }
  }
  long count = 0;
  for (int idx : points) count += scratch[idx];
  return count;
}

}  // namespace

Mask dilate_disk(const Mask& mask, int radius) {
  Mask out(mask.rows(), mask.cols());
  const auto offsets = disk_offsets(std::max(radius, 0));
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      for (const auto& [dr, dc] : offsets) {
        if (mask.in_bounds(r + dr, c + dc)) out(r + dr, c + dc) = 1;
      }
    }
  }
  return out;
}

int default_boundary_radius(int rows) {
  return std::max(1, static_cast<int>(std::lround(2.0 * rows / 480.0)));
}

ImageEvaluation evaluate_image(const LabelMap& pred, const LabelMap& gt,
                               const std::map<int, std::string>* class_of_instance, int dilation_radius,
                               std::string frame_id) {
  if (dilation_radius < 0) throw InvalidInput("dilation radius must be >= 0");
  const OverlapTable table = overlap_table(pred, gt);
  const MatchResult match = hungarian_match(table.f);
  const auto pred_boundaries = boundary_pixels(pred);
  const auto gt_boundaries = boundary_pixels(gt);
  static const std::vector<int> kEmpty;
  auto boundary_of = [](const std::map<int, std::vector<int>>& all, int id) -> const std::vector<int>& {
    auto it = all.find(id);
    return it == all.end() ? kEmpty : it->second;
  };

  ImageEvaluation eval;
  eval.frame_id = std::move(frame_id);
  for (std::size_t j = 0; j < table.gt_ids.size(); ++j) {
    GtObjectResult g;
    g.id = table.gt_ids[j];
    g.area = table.gt_area[j];
    g.boundary = static_cast<long>(boundary_of(gt_boundaries, g.id).size());
    if (class_of_instance != nullptr) {
      auto it = class_of_instance->find(g.id);
      if (it == class_of_instance->end()) {
        throw InvalidInput("frame '" + eval.frame_id + "': object " + std::to_string(g.id) + " has no class");
      }
      g.class_name = it->second;
    }
    eval.gt.push_back(std::move(g));
  }
  for (std::size_t k = 0; k < table.pred_ids.size(); ++k) {
    PredObjectResult p;
    p.id = table.pred_ids[k];
    p.area = table.pred_area[k];
    p.boundary = static_cast<long>(boundary_of(pred_boundaries, p.id).size());
    double best = 0.0;
    for (std::size_t j = 0; j < table.gt_ids.size(); ++j) {
      if (table.intersection(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) > best) {
        best = table.intersection(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
        p.max_overlap_gt = table.gt_ids[j];
      }
    }
    eval.pred.push_back(p);
  }

  std::vector<std::uint8_t> scratch;
  for (const auto& m : match.matches) {
    GtObjectResult& g = eval.gt[m.gt];
    PredObjectResult& p = eval.pred[m.pred];
    const long tp = static_cast<long>(table.intersection(m.gt, m.pred));
    g.matched_pred = p.id;
    p.matched_gt = g.id;
    g.overlap_tp = tp;
    p.overlap_tp = tp;
    const auto& gb = boundary_of(gt_boundaries, g.id);
    const auto& pb = boundary_of(pred_boundaries, p.id);
    p.boundary_tp = count_within(pb, gb, gt.rows(), gt.cols(), dilation_radius, scratch);
    g.boundary_tp = count_within(gb, pb, gt.rows(), gt.cols(), dilation_radius, scratch);
  }
  return eval;
}

Prf boundary_prf(const LabelMap& pred, const LabelMap& gt, const MatchResult& match, int dilation_radius) {
  const OverlapTable table = overlap_table(pred, gt);
  const auto pred_boundaries = boundary_pixels(pred);
  const auto gt_boundaries = boundary_pixels(gt);
  double pred_total = 0.0, gt_total = 0.0, tp_pred = 0.0, tp_gt = 0.0;
  for (const auto& [id, pixels] : pred_boundaries) pred_total += static_cast<double>(pixels.size());
  for (const auto& [id, pixels] : gt_boundaries) gt_total += static_cast<double>(pixels.size());
  std::vector<std::uint8_t> scratch;
  for (const auto& m : match.matches) {
    const auto& gb = gt_boundaries.at(table.gt_ids[m.gt]);
    const auto& pb = pred_boundaries.at(table.pred_ids[m.pred]);
    tp_pred += static_cast<double>(count_within(pb, gb, gt.rows(), gt.cols(), dilation_radius, scratch));
    tp_gt += static_cast<double>(count_within(gb, pb, gt.rows(), gt.cols(), dilation_radius, scratch));
  }
  return make_prf(tp_pred, pred_total, tp_gt, gt_total);
}

namespace {

struct Accumulator {
  double overlap_tp = 0.0, pred_area = 0.0, gt_area = 0.0;
  double boundary_tp_pred = 0.0, pred_boundary = 0.0, boundary_tp_gt = 0.0, gt_boundary = 0.0;
  int objects = 0;

  void add_gt(const GtObjectResult& g) {
    overlap_tp += static_cast<double>(g.overlap_tp);
    gt_area += static_cast<double>(g.area);
    boundary_tp_gt += static_cast<double>(g.boundary_tp);
    gt_boundary += static_cast<double>(g.boundary);
    ++objects;
  }
  void add_pred(const PredObjectResult& p) {
    pred_area += static_cast<double>(p.area);
    boundary_tp_pred += static_cast<double>(p.boundary_tp);
    pred_boundary += static_cast<double>(p.boundary);
  }
  SplitScores scores() const {
    SplitScores s;
    s.overlap = make_prf(overlap_tp, pred_area, overlap_tp, gt_area);
    s.boundary = make_prf(boundary_tp_pred, pred_boundary, boundary_tp_gt, gt_boundary);
    s.objects = objects;
    return s;
  }
};

enum Split { kSeen = 0, kUnseen = 1 };

struct ImageAccumulators {
  Accumulator all;
  Accumulator split[2];
};

ImageAccumulators accumulate(const ImageEvaluation& image, const std::set<std::string>& seen,
                             const std::set<std::string>& unseen) {
  ImageAccumulators acc;
  std::map<int, int> split_of_gt;
  for (const auto& g : image.gt) {
    const bool is_seen = seen.contains(g.class_name);
    const bool is_unseen = unseen.contains(g.class_name);
    if (is_seen == is_unseen) {
      throw InvalidInput("frame '" + image.frame_id + "': class '" + g.class_name +
                         "' must belong to exactly one of the seen/unseen sets");
    }
    const int split = is_seen ? kSeen : kUnseen;
    split_of_gt[g.id] = split;
    acc.all.add_gt(g);
    acc.split[split].add_gt(g);
  }
  for (const auto& p : image.pred) {
    acc.all.add_pred(p);
    const int owner = p.matched_gt != 0 ? p.matched_gt : p.max_overlap_gt;
    if (owner != 0) {
      acc.split[split_of_gt.at(owner)].add_pred(p);
    } else {
      acc.split[kSeen].add_pred(p);
      acc.split[kUnseen].add_pred(p);
    }
  }
  return acc;
}

struct MeanPrf {
  double p = 0.0, r = 0.0, f = 0.0;
  int count = 0;
  void add(const Prf& x) {
    p += x.precision;
    r += x.recall;
    f += x.f;
    ++count;
  }
  Prf mean() const {
    if (count == 0) return {};
    return Prf{p / count, r / count, f / count};
  }
};

Prf hm(const Prf& a, const Prf& b) {
  return Prf{harmonic_mean(a.precision, b.precision), harmonic_mean(a.recall, b.recall), harmonic_mean(a.f, b.f)};
}

nlohmann::json prf_json(const Prf& p) {
  return {{"P", p.precision}, {"R", p.recall}, {"F", p.f}};
}

nlohmann::json split_json(const SplitScores& s) {
  return {{"overlap", prf_json(s.overlap)}, {"boundary", prf_json(s.boundary)}, {"objects", s.objects}};
}

}  // namespace

Prf ImageEvaluation::overlap() const {
  Accumulator acc;
  for (const auto& g : gt) acc.add_gt(g);
  for (const auto& p : pred) acc.add_pred(p);
  return acc.scores().overlap;
}

Prf ImageEvaluation::boundary() const {
  Accumulator acc;
  for (const auto& g : gt) acc.add_gt(g);
  for (const auto& p : pred) acc.add_pred(p);
  return acc.scores().boundary;
}

SplitScores harmonic_scores(const SplitScores& seen, const SplitScores& unseen) {
  SplitScores out;
  out.overlap = hm(seen.overlap, unseen.overlap);
  out.boundary = hm(seen.boundary, unseen.boundary);
  out.objects = seen.objects + unseen.objects;
  return out;
}

SplitScores pooled_scores(std::span<const ImageEvaluation> images) {
  Accumulator acc;
  for (const auto& image : images) {
    for (const auto& g : image.gt) acc.add_gt(g);
    for (const auto& p : image.pred) acc.add_pred(p);
  }
  return acc.scores();
}

SegEvalReport zero_shot_aggregate(std::span<const ImageEvaluation> images, const std::set<std::string>& seen,
                                  const std::set<std::string>& unseen, Aggregation aggregation) {
  for (const auto& name : seen) {
    if (unseen.contains(name)) throw InvalidInput("class '" + name + "' is listed as both seen and unseen");
  }
  SegEvalReport report;
  report.aggregation = aggregation;
  ImageAccumulators pooled;
  MeanPrf mean_overlap[3], mean_boundary[3];  // all, seen, unseen
  int counts[3] = {0, 0, 0};
  for (const auto& image : images) {
    const ImageAccumulators acc = accumulate(image, seen, unseen);
    const SplitScores image_all = acc.all.scores();
    report.per_image.push_back(ImageScores{image.frame_id, image_all.overlap, image_all.boundary,
                                           static_cast<int>(image.gt.size()), static_cast<int>(image.pred.size())});
    const Accumulator* parts[3] = {&acc.all, &acc.split[kSeen], &acc.split[kUnseen]};
    Accumulator* targets[3] = {&pooled.all, &pooled.split[kSeen], &pooled.split[kUnseen]};
    for (int i = 0; i < 3; ++i) {
      Accumulator& t = *targets[i];
      const Accumulator& s = *parts[i];
      t.overlap_tp += s.overlap_tp;
      t.pred_area += s.pred_area;
      t.gt_area += s.gt_area;
      t.boundary_tp_pred += s.boundary_tp_pred;
      t.pred_boundary += s.pred_boundary;
      t.boundary_tp_gt += s.boundary_tp_gt;
      t.gt_boundary += s.gt_boundary;
      t.objects += s.objects;
      counts[i] += s.objects;
      if (s.objects > 0) {
        const SplitScores sc = s.scores();
        mean_overlap[i].add(sc.overlap);
        mean_boundary[i].add(sc.boundary);
      }
    }
  }
  if (aggregation == Aggregation::kPooledObjects) {
    report.all = pooled.all.scores();
    report.seen = pooled.split[kSeen].scores();
    report.unseen = pooled.split[kUnseen].scores();
  } else {
    SplitScores* outs[3] = {&report.all, &report.seen, &report.unseen};
    for (int i = 0; i < 3; ++i) {
      outs[i]->overlap = mean_overlap[i].mean();
      outs[i]->boundary = mean_boundary[i].mean();
      outs[i]->objects = counts[i];
    }
  }
  report.harmonic = harmonic_scores(report.seen, report.unseen);
  return report;
}

std::string SegEvalReport::to_json() const {
  nlohmann::json j;
  j["aggregation"] = aggregation == Aggregation::kPooledObjects ? "pooled_objects" : "per_image_mean";
  j["hm"] = split_json(harmonic);
  j["seen"] = split_json(seen);
  j["unseen"] = split_json(unseen);
  j["all"] = split_json(all);
  nlohmann::json images = nlohmann::json::array();
  for (const auto& img : per_image) {
    images.push_back({{"frame_id", img.frame_id},
                      {"overlap", prf_json(img.overlap)},
                      {"boundary", prf_json(img.boundary)},
                      {"gt_objects", img.gt_objects},
                      {"pred_objects", img.pred_objects}});
  }
  j["per_image"] = std::move(images);
  return j.dump(2);
}

SegEvalReport SegEvalReport::from_json(const std::string& text) {
  SegEvalReport report;
  auto read_prf = [](const nlohmann::json& j) {
    Prf p{j.at("P").get<double>(), j.at("R").get<double>(), j.at("F").get<double>()};
    for (double v : {p.precision, p.recall, p.f}) {
      if (!(v >= 0.0 && v <= 100.0)) throw InvalidInput("report scores must lie in [0, 100]");
    }
    return p;
  };
  auto read_split = [&](const nlohmann::json& j) {
    SplitScores s;
    s.overlap = read_prf(j.at("overlap"));
    if (j.contains("boundary")) s.boundary = read_prf(j.at("boundary"));
    s.objects = j.value("objects", 0);
    return s;
  };
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    report.aggregation =
        j.value("aggregation", std::string("pooled_objects")) == "per_image_mean" ? Aggregation::kPerImageMean
                                                                                  : Aggregation::kPooledObjects;
    report.seen = read_split(j.at("seen"));
    report.unseen = read_split(j.at("unseen"));
    if (j.contains("all")) report.all = read_split(j.at("all"));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput("evaluation report: " + std::string(e.what()));
  }
  report.harmonic = harmonic_scores(report.seen, report.unseen);
  return report;
}

std::string SegEvalReport::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-8s | %7s %7s %7s | %7s %7s %7s\n", "Set", "P", "R", "F", "P", "R", "F");
  out << std::string(8, ' ') << " | " << "        Overlap        " << " | " << "       Boundary\n" << line;
  out << std::string(66, '-') << '\n';
  auto row = [&](const char* name, const SplitScores& s) {
    std::snprintf(line, sizeof(line), "%-8s | %7.2f %7.2f %7.2f | %7.2f %7.2f %7.2f\n", name, s.overlap.precision,
                  s.overlap.recall, s.overlap.f, s.boundary.precision, s.boundary.recall, s.boundary.f);
    out << line;
  };
  row("HM", harmonic);
  row("Seen", seen);
  row("Unseen", unseen);
  row("All", all);
  return out.str();
}

}  // namespace supergbd
