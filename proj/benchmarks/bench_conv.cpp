#include "sigmalr/conv.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace sigmalr;

Image make_image(Index c, Index h, Index w, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Image x(c, h, w);
  std::vector<double> data(static_cast<std::size_t>(c * h * w));
  for (double& v : data) v = n(rng);
  return Image(c, h, w, std::move(data));
}

Mat randn(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Mat::NullaryExpr(r, c, [&] { return n(rng); });
}

// Channels = state.range(0), 3x3 kernel, 16x16 image.
void BM_Im2col(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const Index c = state.range(0);
  const Image x = make_image(c, 16, 16, rng);
  for (auto _ : state) benchmark::DoNotOptimize(im2col(x, 3, 3, ConvSpec{1, 1}));
}
BENCHMARK(BM_Im2col)->Arg(16)->Arg(64);

void BM_ConvIm2col(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const Index c = state.range(0);
  const Image x = make_image(c, 16, 16, rng);
  Tensor4 k({c, c, 3, 3});
  k.flat() = randn(k.size(), 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv_im2col(k, x, ConvSpec{1, 1}));
}
BENCHMARK(BM_ConvIm2col)->Arg(16)->Arg(64);

void BM_CpForward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const Index c = state.range(0);
  const Index r = state.range(1);
  const Image x = make_image(c, 16, 16, rng);
  const CpFactors f{randn(c, r, rng), randn(c, r, rng), randn(3, r, rng), randn(3, r, rng)};
  for (auto _ : state) benchmark::DoNotOptimize(cp_forward(f, x, ConvSpec{1, 1}));
}
BENCHMARK(BM_CpForward)->Args({16, 8})->Args({64, 32});

void BM_Tucker2Forward(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const Index c = state.range(0);
  const Index r = state.range(1);
  const Image x = make_image(c, 16, 16, rng);
  Tucker2Factors f;
  f.G = Tensor4({r, r, 3, 3});
  f.G.flat() = randn(f.G.size(), 1, rng);
  f.U_T = randn(c, r, rng);
  f.U_S = randn(c, r, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tucker2_forward(f, x, ConvSpec{1, 1}));
}
BENCHMARK(BM_Tucker2Forward)->Args({16, 8})->Args({64, 32});

}  // namespace
