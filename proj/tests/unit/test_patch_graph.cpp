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

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "supergbd/error.hpp"
#include "supergbd/patch_graph.hpp"

namespace sg = supergbd;

namespace {

sg::RgbdFrame flat(int rows, int cols, float gray, float depth) {
  sg::RgbdFrame f;
  f.rgb = sg::Image<float>(rows, cols, 3, gray);
  f.depth = sg::Image<float>(rows, cols, 1, depth);
  f.valid = sg::Mask(rows, cols, 1, 1);
  return f;
}

sg::SuperpixelMap grid_map(int rows, int cols, int cell) {
  sg::LabelMap labels(rows, cols);
  const int per_row = (cols + cell - 1) / cell;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) labels(r, c) = (r / cell) * per_row + c / cell;
  }
  return sg::make_superpixel_map(std::move(labels));
}

// Graph with `pos` positive and `neg` negative edges on a path of distinct patches.
sg::PatchGraph path_graph(int pos, int neg) {
  sg::PatchGraph g;
  const int n = pos + neg + 1;
  for (int i = 0; i < n; ++i) {
    sg::PatchFeatures f;
    f.rgb = {static_cast<float>(i), 0.0f, 0.0f};
    g.patches.push_back(f);
  }
  for (int i = 0; i + 1 < n; ++i) {
    sg::GraphEdge e{i, i + 1, i < pos ? sg::EdgeLabel::kPositive : sg::EdgeLabel::kNegative, std::nullopt};
    g.edges.push_back(e);
  }
  g.gt_instance.assign(n, 0);
  return g;
}

}  // namespace

TEST(Normals, ConstantDepthPointsUp) {
  const auto f = flat(10, 12, 0.5f, 0.4f);
  const auto n = sg::compute_normals(f.depth, f.valid);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 12; ++c) {
      EXPECT_FLOAT_EQ(n(r, c, 0), 0.0f);
      EXPECT_FLOAT_EQ(n(r, c, 1), 0.0f);
      EXPECT_FLOAT_EQ(n(r, c, 2), 1.0f);
    }
  }
}

TEST(Normals, RampAlongX) {
  const int w = 20;
  auto f = flat(8, w, 0.5f, 0.0f);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < w; ++c) f.depth(r, c) = static_cast<float>(c) / w;
  }
  const auto n = sg::compute_normals(f.depth, f.valid);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < w; ++c) {
      EXPECT_NEAR(n(r, c, 0), -0.7071068f, 1e-6);
      EXPECT_NEAR(n(r, c, 1), 0.0f, 1e-6);
      EXPECT_NEAR(n(r, c, 2), 0.7071068f, 1e-6);
    }
  }
}

TEST(Normals, UnitLengthAndFinite) {
  sg::Rng rng(5);
  sg::Image<float> depth(16, 16);
  sg::Mask valid(16, 16);
  for (std::size_t i = 0; i < depth.pixel_count(); ++i) {
    valid[i] = rng.bernoulli(0.7);
    depth[i] = valid[i] ? static_cast<float>(rng.uniform()) : 0.0f;
  }
  const auto n = sg::compute_normals(depth, valid);
  for (int r = 0; r < 16; ++r) {
    for (int c = 0; c < 16; ++c) {
      const double len = std::hypot(n(r, c, 0), n(r, c, 1), n(r, c, 2));
      EXPECT_NEAR(len, 1.0, 1e-6);
    }
  }
}

TEST(Gradients, SmoothDepthMatchesNumericalDerivative) {
  const int h = 40, w = 50;
  auto fn = [](double x, double y) { return 0.3 + 0.1 * std::sin(2.0 * x) * std::cos(1.5 * y); };
  sg::Image<float> depth(h, w);
  sg::Mask valid(h, w, 1, 1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) depth(r, c) = static_cast<float>(fn(static_cast<double>(c) / w, static_cast<double>(r) / h));
  }
  const auto g = sg::depth_gradients(depth, valid);
  // Oracle: central difference of the same samples evaluated directly in double.
  for (int r = 1; r + 1 < h; ++r) {
    for (int c = 1; c + 1 < w; ++c) {
      const double gx = (static_cast<double>(depth(r, c + 1)) - depth(r, c - 1)) / (2.0 / w);
      const double gy = (static_cast<double>(depth(r + 1, c)) - depth(r - 1, c)) / (2.0 / h);
      EXPECT_NEAR(g(r, c, 0), gx, 1e-6);
      EXPECT_NEAR(g(r, c, 1), gy, 1e-6);
    }
  }
}

TEST(Features, UniformFrameCenterPatch) {
  const auto f = flat(30, 30, 0.5f, 0.5f);
  const auto map = grid_map(30, 30, 10);
  const auto feats = sg::extract_features(f, map);
  ASSERT_EQ(feats.size(), 9u);
  const auto& center = feats[4];
  float row[sg::kExplicitFeatureDim];
  ASSERT_EQ(sg::write_patch_features(center, {}, row), 9);
  const float expect[9] = {0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.5f, 0.0f, 0.0f, 1.0f};
  for (int i = 0; i < 9; ++i) EXPECT_FLOAT_EQ(row[i], expect[i]) << i;
}

TEST(Features, RedBlueHalvesAverage) {
  auto f = flat(4, 4, 0.0f, 0.5f);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      f.rgb(r, c, 0) = c < 2 ? 1.0f : 0.0f;
      f.rgb(r, c, 2) = c < 2 ? 0.0f : 1.0f;
    }
  }
  const auto feats = sg::extract_features(f, grid_map(4, 4, 4));
  EXPECT_FLOAT_EQ(feats[0].rgb[0], 0.5f);
  EXPECT_FLOAT_EQ(feats[0].rgb[1], 0.0f);
  EXPECT_FLOAT_EQ(feats[0].rgb[2], 0.5f);
}

TEST(Features, AllInvalidPatchFlagged) {
  auto f = flat(4, 8, 0.3f, 0.5f);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      f.valid(r, c) = 0;
      f.depth(r, c) = 0.0f;
    }
  }
  const auto feats = sg::extract_features(f, grid_map(4, 8, 4));
  EXPECT_TRUE(feats[0].depth_missing);
  EXPECT_EQ(feats[0].z, 0.0f);
  EXPECT_FALSE(feats[1].depth_missing);
  EXPECT_FLOAT_EQ(feats[1].z, 0.5f);
}

TEST(Features, SubsetDimensions) {
  sg::PatchFeatures p;
  p.implicit.assign(6, 0.1f);
  float buf[64];
  EXPECT_EQ(sg::write_patch_features(p, {true, true, true, false}, buf), 9);
  EXPECT_EQ(sg::write_patch_features(p, {true, true, true, true}, buf), 15);
  EXPECT_EQ((sg::FeatureSubset{true, false, false, true}.patch_dim(6)), 9);
  EXPECT_EQ((sg::FeatureSubset{true, true, true, true}.patch_dim(21)), 30);
}

TEST(Features, SidecarMustCoverPatches) {
  const auto f = flat(8, 8, 0.5f, 0.5f);
  const auto map = grid_map(8, 8, 4);
  sg::ImplicitFeatures side;
  side.dim = 2;
  side.rows.assign(3, std::vector<float>(2, 0.0f));
  EXPECT_THROW(sg::extract_features(f, map, &side), sg::InvalidInput);
  side.rows.assign(4, std::vector<float>(2, 0.25f));
  side.rows[2].resize(3);
  EXPECT_THROW(sg::extract_features(f, map, &side), sg::InvalidInput);
  side.rows[2].resize(2);
  const auto feats = sg::extract_features(f, map, &side);
  EXPECT_EQ(feats[3].implicit, std::vector<float>(2, 0.25f));
}

TEST(Graph, TwoByTwoSingletonsHaveFourEdges) {
  const auto map = grid_map(2, 2, 1);
  const auto g = sg::build_graph(map, sg::extract_features(flat(2, 2, 0.5f, 0.5f), map));
  ASSERT_EQ(g.edges.size(), 4u);
  std::set<std::pair<int, int>> got;
  for (const auto& e : g.edges) got.insert({e.a, e.b});
  const std::set<std::pair<int, int>> expected = {{0, 1}, {0, 2}, {1, 3}, {2, 3}};
  EXPECT_EQ(got, expected);
}

TEST(Graph, SinglePatchHasNoEdges) {
  const auto map = grid_map(5, 5, 5);
  EXPECT_TRUE(sg::build_graph(map, sg::extract_features(flat(5, 5, 0.5f, 0.5f), map)).edges.empty());
}

TEST(Graph, EdgesEqualBruteForceAdjacency) {
  sg::Rng rng(8);
  for (int t = 0; t < 30; ++t) {
    const auto labels = sg::split_connected(sg::testing::random_blobs(9, 11, 5, rng));
    const auto map = sg::make_superpixel_map(labels);
    const auto g = sg::build_graph(map, std::vector<sg::PatchFeatures>(map.patch_count));
    std::set<std::pair<int, int>> expected;
    for (int r1 = 0; r1 < 9; ++r1) {
      for (int c1 = 0; c1 < 11; ++c1) {
        for (int r2 = 0; r2 < 9; ++r2) {
          for (int c2 = 0; c2 < 11; ++c2) {
            if (std::abs(r1 - r2) + std::abs(c1 - c2) != 1) continue;
            const int a = labels(r1, c1), b = labels(r2, c2);
            if (a < b) expected.insert({a, b});
          }
        }
      }
    }
    std::vector<std::pair<int, int>> got;
    for (const auto& e : g.edges) got.emplace_back(e.a, e.b);
    EXPECT_TRUE(std::is_sorted(got.begin(), got.end()));
    const std::set<std::pair<int, int>> got_set(got.begin(), got.end());
    EXPECT_EQ(got_set, expected);
    EXPECT_EQ(got.size(), expected.size());
  }
}

TEST(Labels, MajorityVote) {
  // Patch 0: columns 0-1 (pure id 3); patch 1: columns 2-3 (pure id 3); patch 2: columns 4-8 with 60/40.
  sg::LabelMap labels(1, 9), gt(1, 9);
  const int patch[9] = {0, 0, 1, 1, 2, 2, 2, 2, 2};
  const int inst[9] = {3, 3, 3, 3, 3, 3, 3, 4, 4};
  for (int c = 0; c < 9; ++c) {
    labels(0, c) = patch[c];
    gt(0, c) = inst[c];
  }
  const auto map = sg::make_superpixel_map(labels);
  auto g = sg::build_graph(map, std::vector<sg::PatchFeatures>(3));
  g = sg::label_edges_from_gt(std::move(g), map, gt);
  EXPECT_EQ(g.gt_instance, (std::vector<int>{3, 3, 3}));
  for (const auto& e : g.edges) EXPECT_EQ(e.gt, sg::EdgeLabel::kPositive);

  gt(0, 4) = 1;
  gt(0, 5) = 1;
  gt(0, 6) = 2;
  gt(0, 7) = 2;
  gt(0, 8) = 1;  // 3 of 1, 2 of 2
  g = sg::label_edges_from_gt(std::move(g), map, gt);
  EXPECT_EQ(g.gt_instance[2], 1);
  EXPECT_EQ(g.edges.back().gt, sg::EdgeLabel::kNegative);
}

TEST(Labels, TieGoesToSmallerIdAndMatchesOracle) {
  sg::Rng rng(31);
  for (int t = 0; t < 50; ++t) {
    const auto patches = sg::split_connected(sg::testing::random_blobs(12, 12, 4, rng));
    const auto gt = sg::testing::random_blobs(12, 12, 3, rng);
    const auto map = sg::make_superpixel_map(patches);
    EXPECT_EQ(sg::majority_instance(map, gt), sg::testing::majority_projection(patches, gt));
  }
  sg::LabelMap one(1, 2), gt(1, 2);
  gt(0, 0) = 5;
  gt(0, 1) = 2;
  EXPECT_EQ(sg::majority_instance(sg::make_superpixel_map(one), gt), std::vector<int>{2});
}

TEST(Sampler, BatchComposition) {
  const std::vector<sg::PatchGraph> graphs = {path_graph(800, 200)};
  sg::PairSampler sampler(graphs, {});
  EXPECT_EQ(sampler.positive_pool(), 800u);
  EXPECT_EQ(sampler.negative_pool(), 200u);
  EXPECT_DOUBLE_EQ(sampler.natural_positive_fraction(), 0.8);
  sg::Rng rng(1);
  std::vector<float> feats(400 * sampler.pair_dim()), labels(400);
  sampler.sample_batch(0.25, 400, rng, feats, labels);
  int pos = 0;
  for (float l : labels) pos += l == 1.0f;
  EXPECT_EQ(pos, 100);
  EXPECT_EQ(400 - pos, 300);
}

TEST(Sampler, SwapSymmetryAndLabelProvenance) {
  const std::vector<sg::PatchGraph> graphs = {path_graph(30, 20)};
  sg::Rng rng(2);
  const auto samples = sg::sample_pairs(graphs, 0.5, 64, 20, {}, rng);
  int swapped = 0;
  for (const auto& s : samples) {
    ASSERT_EQ(s.features.size(), 18u);
    const int a = static_cast<int>(s.features[0]);
    const int b = static_cast<int>(s.features[9]);
    ASSERT_EQ(std::abs(a - b), 1);
    const int edge = std::min(a, b);
    EXPECT_EQ(s.label, edge < 30 ? 1 : 0);
    swapped += a > b;
  }
  const double frac = static_cast<double>(swapped) / samples.size();
  EXPECT_NEAR(frac, 0.5, 0.05);
}

TEST(Sampler, EmpiricalFraction) {
  const std::vector<sg::PatchGraph> graphs = {path_graph(500, 300)};
  for (double target : {0.5, 0.25, 0.1}) {
    sg::Rng rng(3);
    const auto samples = sg::sample_pairs(graphs, target, 100, 100, {}, rng);
    int pos = 0;
    for (const auto& s : samples) pos += s.label;
    EXPECT_NEAR(static_cast<double>(pos) / samples.size(), target, 0.02);
  }
}

TEST(Sampler, Deterministic) {
  const std::vector<sg::PatchGraph> graphs = {path_graph(40, 40)};
  sg::Rng a(9), b(9);
  const auto x = sg::sample_pairs(graphs, 0.25, 32, 5, {}, a);
  const auto y = sg::sample_pairs(graphs, 0.25, 32, 5, {}, b);
  ASSERT_EQ(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(x[i].features, y[i].features);
    EXPECT_EQ(x[i].label, y[i].label);
  }
}

TEST(Sampler, EmptyPoolIsAnError) {
  const std::vector<sg::PatchGraph> graphs = {path_graph(10, 0)};
  sg::Rng rng(1);
  EXPECT_THROW(sg::sample_pairs(graphs, 0.25, 8, 1, {}, rng), sg::InvalidInput);
  EXPECT_THROW(sg::sample_pairs(graphs, 1.0, 8, 1, {}, rng), sg::InvalidInput);
}
