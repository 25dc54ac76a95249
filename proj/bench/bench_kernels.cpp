/*
 * Copyright 2026 The dianet Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <vector>

#include "dia/forest.hpp"
#include "dia/kernels.hpp"
#include "dia/rng.hpp"

namespace {

using dia::kernels::ConvGeometry;

// 3x3 same-padding conv of a CIFAR-sized batch; range(0) = channels.
ConvGeometry geometry(benchmark::State& state) {
  ConvGeometry g;
  g.batch = 32;
  g.in_channels = g.out_channels = static_cast<std::size_t>(state.range(0));
  g.height = g.width = 32 / (g.in_channels / 16);
  g.kernel_h = g.kernel_w = 3;
  g.padding = 1;
  return g;
}

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  dia::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <auto Kernel>
void conv_forward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_values(g.input_size(), 1);
  const auto w = random_values(g.weight_size(), 2);
  std::vector<double> y(g.output_size());
  for (auto _ : state) {
    Kernel(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * g.batch));
}

template <auto Kernel>
void conv_backward_weight(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = random_values(g.input_size(), 1);
  const auto dy = random_values(g.output_size(), 3);
  std::vector<double> dw(g.weight_size());
  for (auto _ : state) {
    Kernel(g, x, dy, dw);
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * g.batch));
}

BENCHMARK(conv_forward<dia::kernels::serial::conv2d_forward>)->Name("conv_forward/serial")->Arg(16)->Arg(32)->Arg(64)->UseRealTime();
BENCHMARK(conv_forward<dia::kernels::parallel::conv2d_forward>)->Name("conv_forward/parallel")->Arg(16)->Arg(32)->Arg(64)->UseRealTime();
BENCHMARK(conv_backward_weight<dia::kernels::serial::conv2d_backward_weight>)->Name("conv_backward_weight/serial")->Arg(16)->Arg(64)->UseRealTime();
BENCHMARK(conv_backward_weight<dia::kernels::parallel::conv2d_backward_weight>)->Name("conv_backward_weight/parallel")->Arg(16)->Arg(64)->UseRealTime();

// Integration-analysis sized forest: 512 samples, 2 source layers of 32 channels.
void forest_fit(benchmark::State& state) {
  dia::Matrix x(512, 64), y(512, 32);
  x.values = random_values(x.values.size(), 4);
  y.values = random_values(y.values.size(), 5);
  dia::ForestOptions o;
  o.trees = 32;
  o.parallel = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(dia::RegressionForest::fit(x, y, o).importances().data());
}
BENCHMARK(forest_fit)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
