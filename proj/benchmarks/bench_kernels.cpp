// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "qat/autodiff/ops.hpp"
#include "qat/nn/model.hpp"
#include "qat/nn/zoo.hpp"
#include "qat/quant/quantizer.hpp"

namespace {

using namespace qat;
using T = ad::Tensor<float>;

T random_tensor(const ad::Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> d(0.0f, 1.0f);
  T t(shape);
  for (auto& v : t.data()) v = d(rng);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const T a = random_tensor({n, n}, 1), b = random_tensor({n, n}, 2);
  for (auto _ : state) {
    ad::Graph<float> g;
    benchmark::DoNotOptimize(ad::matmul(g.constant(a), g.constant(b)).value().data().data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * n * n * n);
}
BENCHMARK(BM_Matmul)->Arg(64)->Arg(256);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const T x = random_tensor({64, c, 16, 16}, 3), w = random_tensor({c, c, 3, 3}, 4);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto xv = g.input(x);
    auto wv = g.input(w);
    auto y = ad::conv2d(xv, wv, {1, 1});
    g.backward(ad::mse_half(y, g.constant(T(y.shape()))));
    benchmark::DoNotOptimize(g.grad(wv).data().data());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Arg(16)->Arg(32);

void BM_QuantizeWeights(benchmark::State& state) {
  const T w = random_tensor({static_cast<std::size_t>(state.range(0))}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(quant::quantize_weights(w, 2).data().data());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_QuantizeWeights)->Arg(1 << 12)->Arg(1 << 18);

void BM_TrainStep(benchmark::State& state) {
  const bool resnet = state.range(0) == 1;
  const int bits = static_cast<int>(state.range(1));
  const nn::ModelSpec spec = resnet ? nn::mini_resnet({3, 32, 32}, 10, 8) : nn::mini_alexnet({1, 28, 28}, 10, 16);
  nn::Model<float> model(spec, quant::QuantConfig{bits, bits}, 0);
  const T x = random_tensor({64, spec.input[0], spec.input[1], spec.input[2]}, 6);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  for (auto _ : state) {
    ad::Graph<float> g;
    auto out = model.forward(g, x, nn::Mode::train);
    g.backward(ad::softmax_cross_entropy(out.logits, std::span<const int>(labels)));
  }
  state.SetLabel(spec.name + " w" + std::to_string(bits) + "a" + std::to_string(bits));
}
BENCHMARK(BM_TrainStep)->Args({0, 32})->Args({0, 2})->Args({1, 32})->Args({1, 2})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
