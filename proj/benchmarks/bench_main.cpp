// Copyright 2026 The attnscope Authors. All rights reserved.
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

#include "attnscope/clustering.hpp"
#include "attnscope/embedding.hpp"
#include "attnscope/feature.hpp"
#include "attnscope/rng.hpp"
#include "attnscope/synth.hpp"

namespace {

using namespace attnscope;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

void BM_FeatureMatrix(benchmark::State& state) {
  const auto length = static_cast<std::size_t>(state.range(0));
  const auto planted = gen_bundle(4, length, 8, 0.05, 1);
  for (auto _ : state) benchmark::DoNotOptimize(feature_matrix(planted.bundle));
  state.SetItemsProcessed(state.iterations() * 16 * 8 * static_cast<std::int64_t>(length * length));
}
BENCHMARK(BM_FeatureMatrix)->Arg(32)->Arg(64)->Arg(128);

void BM_KMeans(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 21, 7);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(x, 4, 42));
}
BENCHMARK(BM_KMeans)->Arg(144)->Arg(1000);

void BM_Tsne(benchmark::State& state) {
  const auto x = random_matrix(static_cast<std::size_t>(state.range(0)), 21, 11);
  TsneConfig cfg;
  cfg.perplexity = 15.0;
  cfg.iterations = 250;
  for (auto _ : state) benchmark::DoNotOptimize(tsne(x, cfg));
}
BENCHMARK(BM_Tsne)->Arg(50)->Arg(144)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
