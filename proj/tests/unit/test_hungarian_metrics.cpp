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

#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <utility>

#include "oracles.hpp"
#include "supergbd/error.hpp"
#include "supergbd/hungarian.hpp"
#include "supergbd/metrics.hpp"

namespace sg = supergbd;

namespace {

sg::LabelMap from_rows(const std::vector<std::vector<int>>& rows) {
  sg::LabelMap m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

sg::LabelMap square(int size, int r0, int c0, int side, int id) {
  sg::LabelMap m(size, size);
  for (int r = r0; r < r0 + side; ++r) {
    for (int c = c0; c < c0 + side; ++c) m(r, c) = id;
  }
  return m;
}

// Best total over all partial injections of rows into columns.
double brute_force_best(const Eigen::MatrixXd& f) {
  std::vector<bool> used(f.cols(), false);
  std::function<double(int)> go = [&](int r) -> double {
    if (r == f.rows()) return 0.0;
    double best = go(r + 1);
    for (int c = 0; c < f.cols(); ++c) {
      if (used[c]) continue;
      used[c] = true;
      best = std::max(best, f(r, c) + go(r + 1));
      used[c] = false;
    }
    return best;
  };
  return go(0);
}

sg::Prf score(const sg::LabelMap& pred, const sg::LabelMap& gt) {
  return sg::overlap_prf(pred, gt, sg::hungarian_match(sg::pairwise_f_matrix(pred, gt)));
}

std::vector<int> random_permutation(sg::Rng& rng) {
  std::vector<int> perm(64);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 63; i > 1; --i) std::swap(perm[i], perm[1 + rng.uniform_int(0, i - 1)]);
  for (int i = 1; i < 64; ++i) perm[i] += 100;
  return perm;
}

sg::LabelMap apply_ids(const sg::LabelMap& m, const std::vector<int>& perm) {
  sg::LabelMap out = m;
  for (auto& v : out.data()) v = perm[v];
  return out;
}

sg::LabelMap permute_ids(const sg::LabelMap& m, sg::Rng& rng) { return apply_ids(m, random_permutation(rng)); }

std::set<std::pair<int, int>> matched_pairs(const sg::ImageEvaluation& e) {
  std::set<std::pair<int, int>> out;
  for (const auto& g : e.gt) {
    if (g.matched_pred != 0) out.emplace(g.matched_pred, g.id);
  }
  return out;
}

}  // namespace

TEST(PairwiseF, IdenticalMapsAreDiagonal) {
  const auto m = from_rows({{1, 1, 2}, {0, 3, 2}});
  const auto f = sg::pairwise_f_matrix(m, m);
  EXPECT_TRUE(f.isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST(PairwiseF, DisjointObjectsAreZero) {
  const auto a = from_rows({{1, 0, 0}, {0, 0, 0}});
  const auto b = from_rows({{0, 0, 0}, {0, 0, 2}});
  EXPECT_EQ(sg::pairwise_f_matrix(a, b).norm(), 0.0);
}

TEST(PairwiseF, HandCountedFourByFour) {
  const auto gt = from_rows({{1, 1, 1, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  const auto pred = from_rows({{1, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}});
  const auto f = sg::pairwise_f_matrix(pred, gt);
  ASSERT_EQ(f.rows(), 1);
  EXPECT_NEAR(f(0, 0), 0.8, 1e-12);
  const auto prf = score(pred, gt);
  EXPECT_NEAR(prf.precision, 100.0, 1e-9);
  EXPECT_NEAR(prf.recall, 200.0 / 3.0, 1e-9);
  EXPECT_NEAR(prf.f, 80.0, 1e-9);
}

TEST(Hungarian, DominantDiagonal) {
  Eigen::MatrixXd f(2, 2);
  f << 0.9, 0.1, 0.2, 0.8;
  const auto m = sg::hungarian_match(f);
  ASSERT_EQ(m.matches.size(), 2u);
  for (const auto& x : m.matches) EXPECT_EQ(x.gt, x.pred);
}

TEST(Hungarian, AntiDiagonal) {
  Eigen::MatrixXd f(2, 2);
  f << 0.1, 0.9, 0.7, 0.2;
  const auto m = sg::hungarian_match(f);
  ASSERT_EQ(m.matches.size(), 2u);
  for (const auto& x : m.matches) EXPECT_EQ(x.pred, 1 - x.gt);
}

TEST(Hungarian, ZeroScoreMatchesDropped) {
  Eigen::MatrixXd f(2, 3);
  f << 0.0, 0.0, 0.5, 0.0, 0.0, 0.0;
  const auto m = sg::hungarian_match(f);
  ASSERT_EQ(m.matches.size(), 1u);
  EXPECT_EQ(m.unmatched_gt, std::vector<int>{1});
  EXPECT_EQ(m.unmatched_pred, (std::vector<int>{0, 1}));
}

TEST(Hungarian, OptimalOnRandomMatrices) {
  sg::Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const int g = static_cast<int>(rng.uniform_int(1, 7));
    const int s = static_cast<int>(rng.uniform_int(1, 7));
    Eigen::MatrixXd f(g, s);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      f.data()[i] = rng.bernoulli(0.3) ? 0.0 : std::round(rng.uniform() * 8.0) / 8.0;
    }
    const auto m = sg::hungarian_match(f);
    EXPECT_NEAR(m.total_f(), brute_force_best(f), 1e-9) << "trial " << trial;
    std::set<int> rows, cols;
    for (const auto& x : m.matches) {
      EXPECT_TRUE(rows.insert(x.gt).second);
      EXPECT_TRUE(cols.insert(x.pred).second);
    }
  }
}

TEST(Hungarian, RejectsNegativeEntries) {
  Eigen::MatrixXd f(1, 1);
  f << -0.1;
  EXPECT_THROW(sg::hungarian_match(f), sg::InvalidInput);
}

TEST(SolveAssignment, MinimisesCost) {
  Eigen::MatrixXd c(3, 3);
  c << 4, 1, 3, 2, 0, 5, 3, 2, 2;
  const auto a = sg::solve_assignment(c);
  double total = 0;
  for (int i = 0; i < 3; ++i) total += c(i, a[i]);
  EXPECT_EQ(total, 5.0);
}

TEST(OverlapPrf, PerfectAndEmpty) {
  const auto gt = from_rows({{1, 1, 0}, {2, 2, 0}});
  const auto perfect = score(gt, gt);
  EXPECT_DOUBLE_EQ(perfect.precision, 100.0);
  EXPECT_DOUBLE_EQ(perfect.recall, 100.0);
  EXPECT_DOUBLE_EQ(perfect.f, 100.0);
  const auto empty = score(sg::LabelMap(2, 3), gt);
  EXPECT_EQ(empty.precision, 0.0);
  EXPECT_EQ(empty.recall, 0.0);
  EXPECT_EQ(empty.f, 0.0);
}

TEST(OverlapPrf, MatchesExhaustiveOracle) {
  sg::Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const auto gt = sg::testing::random_blobs(8, 9, 4, rng);
    const auto pred = sg::testing::random_blobs(8, 9, 4, rng);
    const auto got = score(pred, gt);
    const auto oracle = sg::testing::exhaustive_overlap(pred, gt);
    bool any = false;
    for (const auto& o : oracle.optimal_scores) {
      any |= std::abs(o.precision - got.precision) <= 1e-9 && std::abs(o.recall - got.recall) <= 1e-9 &&
             std::abs(o.f - got.f) <= 1e-9;
    }
    EXPECT_TRUE(any) << "trial " << trial;
  }
}

TEST(OverlapPrf, RelabelInvariant) {
  sg::Rng rng(5);
  int same_matching = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto gt = sg::testing::random_blobs(10, 10, 5, rng);
    const auto pred = sg::testing::random_blobs(10, 10, 5, rng);
    const auto base = score(pred, gt);
    const auto a = score(permute_ids(pred, rng), gt);
    const auto b = score(pred, permute_ids(gt, rng));
    EXPECT_NEAR(a.f, base.f, 1e-9);
    EXPECT_NEAR(b.f, base.f, 1e-9);
    // Boundary scores follow the overlap matching, which is only id-free when
    // the optimum is unique; compare them whenever both runs picked the same pairs.
    const auto pp = random_permutation(rng);
    const auto gp = random_permutation(rng);
    const auto be = sg::evaluate_image(pred, gt, nullptr, 1);
    const auto bp = sg::evaluate_image(apply_ids(pred, pp), apply_ids(gt, gp), nullptr, 1);
    EXPECT_NEAR(be.overlap().f, bp.overlap().f, 1e-9);
    std::set<std::pair<int, int>> mapped;
    for (const auto& [p, g] : matched_pairs(be)) mapped.emplace(pp[p], gp[g]);
    if (mapped == matched_pairs(bp)) {
      EXPECT_NEAR(be.boundary().f, bp.boundary().f, 1e-9);
      ++same_matching;
    }
  }
  EXPECT_GT(same_matching, 25);
}

TEST(Boundary, SinglePixelObject) {
  sg::LabelMap m(5, 5);
  m(2, 2) = 7;
  const auto b = sg::object_boundary(m, 7);
  EXPECT_EQ(b(2, 2), 1);
  EXPECT_EQ(std::accumulate(b.data().begin(), b.data().end(), 0), 1);
}

TEST(Boundary, IdenticalMapsScoreFullAtAnyRadius) {
  const auto gt = from_rows({{1, 1, 0, 2}, {1, 1, 0, 2}, {3, 3, 3, 2}});
  const auto match = sg::hungarian_match(sg::pairwise_f_matrix(gt, gt));
  for (int radius : {0, 1, 2, 5}) EXPECT_DOUBLE_EQ(sg::boundary_prf(gt, gt, match, radius).f, 100.0);
}

TEST(Boundary, ShiftedSquare) {
  const auto gt = square(20, 5, 5, 10, 1);
  const auto pred = square(20, 5, 6, 10, 1);
  const auto match = sg::hungarian_match(sg::pairwise_f_matrix(pred, gt));
  EXPECT_DOUBLE_EQ(sg::boundary_prf(pred, gt, match, 2).f, 100.0);

  // Oracle: contour pixels by direct neighbour test, then intersection count.
  auto contour = [](const sg::LabelMap& m) {
    std::set<std::pair<int, int>> out;
    for (int r = 1; r + 1 < m.rows(); ++r) {
      for (int c = 1; c + 1 < m.cols(); ++c) {
        if (m(r, c) && (!m(r - 1, c) || !m(r + 1, c) || !m(r, c - 1) || !m(r, c + 1))) out.insert({r, c});
      }
    }
    return out;
  };
  const auto bg = contour(gt), bp = contour(pred);
  std::vector<std::pair<int, int>> both;
  std::set_intersection(bg.begin(), bg.end(), bp.begin(), bp.end(), std::back_inserter(both));
  const double p = 100.0 * both.size() / bp.size();
  const double r = 100.0 * both.size() / bg.size();
  const auto got = sg::boundary_prf(pred, gt, match, 0);
  EXPECT_NEAR(got.precision, p, 1e-9);
  EXPECT_NEAR(got.recall, r, 1e-9);
  EXPECT_NEAR(got.f, 2 * p * r / (p + r), 1e-9);
  EXPECT_LT(got.f, 100.0);
}

TEST(Boundary, DefaultRadiusScalesWithHeight) {
  EXPECT_EQ(sg::default_boundary_radius(480), 2);
  EXPECT_EQ(sg::default_boundary_radius(960), 4);
  EXPECT_EQ(sg::default_boundary_radius(256), 1);
  EXPECT_EQ(sg::default_boundary_radius(16), 1);
}

TEST(Harmonic, PublishedPairs) {
  EXPECT_NEAR(sg::harmonic_mean(79.23, 67.53), 72.92, 0.01);
  EXPECT_NEAR(sg::harmonic_mean(73.05, 68.53), 70.72, 0.01);
  EXPECT_NEAR(sg::harmonic_mean(76.31, 76.66), 76.48, 0.01);
  EXPECT_EQ(sg::harmonic_mean(0.0, 0.0), 0.0);
}

TEST(Harmonic, Bounds) {
  sg::Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double s = rng.uniform(0, 100), u = rng.uniform(0, 100);
    const double hm = sg::harmonic_mean(s, u);
    EXPECT_LE(hm, (s + u) / 2 + 1e-9);
    EXPECT_LE(hm, 2 * std::min(s, u) + 1e-9);
  }
}

TEST(ZeroShot, GroundTruthAgainstItself) {
  const auto gt = from_rows({{1, 1, 0, 2}, {1, 1, 0, 2}, {3, 3, 3, 2}});
  const std::map<int, std::string> classes = {{1, "a"}, {2, "b"}, {3, "c"}};
  const std::vector<sg::ImageEvaluation> images = {sg::evaluate_image(gt, gt, &classes, 1, "x")};
  const auto report = sg::zero_shot_aggregate(images, {"a", "c"}, {"b"});
  for (const auto* s : {&report.seen, &report.unseen, &report.all, &report.harmonic}) {
    for (const auto* p : {&s->overlap, &s->boundary}) {
      EXPECT_DOUBLE_EQ(p->precision, 100.0);
      EXPECT_DOUBLE_EQ(p->recall, 100.0);
      EXPECT_DOUBLE_EQ(p->f, 100.0);
    }
  }
  EXPECT_EQ(report.seen.objects, 2);
  EXPECT_EQ(report.unseen.objects, 1);
}

TEST(ZeroShot, SplitsByClassAndAssignsUnmatchedPredictions) {
  // gt: object 1 (seen) and object 2 (unseen); pred covers 1 exactly, 2 in half, plus a stray.
  const auto gt = from_rows({{1, 1, 0, 2, 2}, {1, 1, 0, 2, 2}});
  const auto pred = from_rows({{5, 5, 9, 6, 6}, {5, 5, 0, 7, 7}});
  const std::map<int, std::string> classes = {{1, "s"}, {2, "u"}};
  const std::vector<sg::ImageEvaluation> images = {sg::evaluate_image(pred, gt, &classes, 1)};
  const auto report = sg::zero_shot_aggregate(images, {"s"}, {"u"});
  EXPECT_DOUBLE_EQ(report.seen.overlap.recall, 100.0);
  // Unseen: tp 2 over pred 6+7 (4 px) and gt 4 px; the stray pixel 9 overlaps nothing and counts in both.
  EXPECT_NEAR(report.unseen.overlap.precision, 100.0 * 2 / 5, 1e-9);
  EXPECT_NEAR(report.unseen.overlap.recall, 50.0, 1e-9);
  EXPECT_NEAR(report.seen.overlap.precision, 100.0 * 4 / 5, 1e-9);
}

TEST(ZeroShot, PooledVersusPerImage) {
  const std::map<int, std::string> classes = {{1, "s"}};
  const auto gt_big = square(10, 0, 0, 6, 1);
  const auto gt_small = square(10, 0, 0, 2, 1);
  const std::vector<sg::ImageEvaluation> images = {
      sg::evaluate_image(gt_big, gt_big, &classes, 1, "a"),
      sg::evaluate_image(sg::LabelMap(10, 10), gt_small, &classes, 1, "b")};
  const auto pooled = sg::zero_shot_aggregate(images, {"s"}, {}, sg::Aggregation::kPooledObjects);
  const auto mean = sg::zero_shot_aggregate(images, {"s"}, {}, sg::Aggregation::kPerImageMean);
  EXPECT_NEAR(pooled.seen.overlap.recall, 100.0 * 36 / 40, 1e-9);
  EXPECT_NEAR(mean.seen.overlap.recall, 50.0, 1e-9);
}

TEST(ZeroShot, UnknownClassIsAnError) {
  const auto gt = from_rows({{1}});
  const std::map<int, std::string> classes = {{1, "mystery"}};
  const std::vector<sg::ImageEvaluation> images = {sg::evaluate_image(gt, gt, &classes, 1)};
  EXPECT_THROW(sg::zero_shot_aggregate(images, {"s"}, {"u"}), sg::InvalidInput);
  EXPECT_THROW(sg::zero_shot_aggregate(images, {"mystery"}, {"mystery"}), sg::InvalidInput);
}

TEST(Report, JsonRoundTripRecomputesHarmonic) {
  const auto gt = from_rows({{1, 1, 0, 2}, {1, 1, 0, 2}});
  const auto pred = from_rows({{1, 0, 0, 2}, {1, 1, 0, 2}});
  const std::map<int, std::string> classes = {{1, "a"}, {2, "b"}};
  const std::vector<sg::ImageEvaluation> images = {sg::evaluate_image(pred, gt, &classes, 1)};
  const auto report = sg::zero_shot_aggregate(images, {"a"}, {"b"});
  const auto back = sg::SegEvalReport::from_json(report.to_json());
  EXPECT_NEAR(back.seen.overlap.f, report.seen.overlap.f, 1e-9);
  EXPECT_NEAR(back.harmonic.overlap.f, report.harmonic.overlap.f, 1e-9);
  EXPECT_NE(report.to_table().find("Unseen"), std::string::npos);
  EXPECT_THROW(sg::SegEvalReport::from_json(R"({"seen":{"overlap":{"P":1,"R":2,"F":300}}})"), sg::InvalidInput);
}
