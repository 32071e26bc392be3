// Copyright 2026 The LENS Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "lens/keypoint.hpp"
#include "lens/pipeline.hpp"
#include "lens/synthetic.hpp"
#include "lens/trainer.hpp"

namespace {

using namespace lens;

Tensor random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({rows, cols});
  for (double& v : t.data()) v = n(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(128);

void BM_Nms(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor map = random_matrix(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(keypoint::nms_extract(map, 4.0, 16));
}
BENCHMARK(BM_Nms)->Arg(16)->Arg(32)->Arg(64);

void BM_SubpixelRefine(benchmark::State& state) {
  const Tensor map = random_matrix(32, 32, 4);
  const keypoint::KeypointSet points = keypoint::nms_extract(map, 4.0, 16);
  for (auto _ : state) benchmark::DoNotOptimize(keypoint::subpixel_refine(map, points));
}
BENCHMARK(BM_SubpixelRefine);

void BM_Forward(benchmark::State& state) {
  const synth::ToyProblem toy =
      synth::make_toy_problem(8, static_cast<std::size_t>(state.range(0)), 16, 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_pipeline(toy.model, toy.sample.input, toy.sample.image));
  }
}
BENCHMARK(BM_Forward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
  const synth::ToyProblem toy =
      synth::make_toy_problem(8, static_cast<std::size_t>(state.range(0)), 16, 6);
  const ForwardOptions options;
  for (auto _ : state) benchmark::DoNotOptimize(train::backward(toy.model, toy.sample, options));
}
BENCHMARK(BM_Backward)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
