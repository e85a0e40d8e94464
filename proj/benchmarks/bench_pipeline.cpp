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

#include <benchmark/benchmark.h>

#include <vector>

#include "supergbd/patch_graph.hpp"
#include "supergbd/pipeline.hpp"
#include "supergbd/superpixel.hpp"
#include "supergbd/synthgen.hpp"
#include "supergbd/tinynet.hpp"

namespace sg = supergbd;

namespace {

const sg::RgbdFrame& scene() {
  static const sg::RgbdFrame frame = [] {
    sg::SceneSpec spec;
    spec.seed = 5;
    return sg::generate_benchmark_frame(spec, sg::SceneSplit::kTest, 0, "bench");
  }();
  return frame;
}

sg::MlpModel default_model() {
  sg::TrainConfig c;
  std::vector<int> dims = {2 * c.features.patch_dim(0)};
  dims.insert(dims.end(), c.hidden.begin(), c.hidden.end());
  dims.push_back(1);
  return sg::MlpModel::initialized(dims, c.dropout_rate, 1);
}

void BM_SlicRgb(benchmark::State& state) {
  sg::SlicConfig c;
  c.target_patch_count = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sg::slic_rgb(scene(), c));
}
BENCHMARK(BM_SlicRgb)->Arg(32)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Preprocess(benchmark::State& state) {
  const sg::PipelineConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(sg::preprocess(scene(), c));
}
BENCHMARK(BM_Preprocess)->Unit(benchmark::kMillisecond);

void BM_InferPreprocessed(benchmark::State& state) {
  const sg::PipelineConfig c;
  const auto data = sg::preprocess(scene(), c);
  const auto model = default_model();
  for (auto _ : state) benchmark::DoNotOptimize(sg::infer(data, model, c));
}
BENCHMARK(BM_InferPreprocessed)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto model = default_model();
  sg::Rng rng(2);
  sg::MatrixF x(state.range(0), model.input_dim());
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform());
  for (auto _ : state) benchmark::DoNotOptimize(sg::forward(model, x, sg::Mode::kEval));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_TrainStep(benchmark::State& state) {
  auto model = default_model();
  auto adam = sg::AdamState::for_model(model);
  sg::Rng rng(3);
  sg::MatrixF x(256, model.input_dim());
  std::vector<float> labels(256);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform());
  for (auto& l : labels) l = rng.bernoulli(0.25) ? 1.0f : 0.0f;
  for (auto _ : state) benchmark::DoNotOptimize(sg::backward_and_step(model, x, labels, adam, 1e-3, rng));
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
