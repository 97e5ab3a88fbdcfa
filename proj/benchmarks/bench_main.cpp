// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <vector>

#include "asd/encoder.hpp"
#include "asd/eval.hpp"
#include "asd/rng.hpp"
#include "asd/scoring.hpp"

namespace {

asd::ImageTensor random_image(std::size_t h, std::size_t w, std::size_t b, std::uint64_t seed) {
  asd::ImageTensor img(h, w, b);
  asd::Rng rng(seed);
  for (double& v : img.values()) v = rng.uniform();
  return img;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const auto patch = static_cast<std::size_t>(state.range(1));
  const asd::pyramid::ScaleSet scales{{0.5, 1.0, 2.0}, patch};
  const auto params = asd::encoder::init_params(1, 3, patch, 5, 3);
  const auto img = random_image(side, side, 3, 2);
  for (auto _ : state) benchmark::DoNotOptimize(asd::encoder::forward_image(img, scales, params));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * side * side));
}
BENCHMARK(BM_EncoderForward)->Args({32, 9})->Args({32, 15})->Unit(benchmark::kMillisecond);

void BM_EncoderBackward(benchmark::State& state) {
  const asd::pyramid::ScaleSet scales{{0.5, 1.0, 2.0}, 9};
  const auto params = asd::encoder::init_params(1, 3, 9, 5, 3);
  const auto img = random_image(32, 32, 3, 2);
  const auto fwd = asd::encoder::forward_image(img, scales, params);
  asd::DescriptorCube d(32, 32, 5);
  for (double& v : d.values()) v = 1e-3;
  for (auto _ : state) {
    auto grad = params.zeros_like();
    asd::encoder::backward_image(img, scales, params, fwd.concat, &d, nullptr, grad);
    benchmark::DoNotOptimize(grad.values().data());
  }
}
BENCHMARK(BM_EncoderBackward)->Unit(benchmark::kMillisecond);

void BM_Mahalanobis(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  asd::Rng rng(3);
  std::vector<double> rows(dim * 4 * dim);
  for (double& v : rows) v = rng.normal();
  const auto model = asd::scoring::fit_gaussian(rows, dim);
  std::vector<double> x(dim, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(asd::scoring::mahalanobis(x, model));
}
BENCHMARK(BM_Mahalanobis)->Arg(5)->Arg(10);

void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  asd::Rng rng(4);
  std::vector<double> degrees(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<std::uint8_t>(i % 7 == 0);
    degrees[i] = rng.uniform() + 0.3 * labels[i];
  }
  for (auto _ : state) benchmark::DoNotOptimize(asd::eval::roc_auc(degrees, labels));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_RocAuc)->Arg(1 << 14)->Arg(1 << 18);

}  // namespace

BENCHMARK_MAIN();
