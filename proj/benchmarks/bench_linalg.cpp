#include "sigmalr/linalg.hpp"
#include "sigmalr/rank_select.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace sigmalr;

Mat spd(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  const Mat a = Mat::NullaryExpr(n, n, [&] { return d(rng); });
  return a * a.transpose() + Mat::Identity(n, n);
}

void BM_SymSqrt(benchmark::State& state) {
  std::mt19937_64 rng(20);
  const Mat s = spd(state.range(0), rng);
  const auto method = state.range(1) == 0 ? SqrtMethod::cholesky : SqrtMethod::svd;
  for (auto _ : state) benchmark::DoNotOptimize(sym_sqrt(s, SymSolveConfig{}, method));
}
BENCHMARK(BM_SymSqrt)->Args({144, 0})->Args({144, 1})->Args({576, 0})->Args({576, 1})
    ->Unit(benchmark::kMillisecond);

void BM_Minres(benchmark::State& state) {
  std::mt19937_64 rng(21);
  const Mat a = spd(state.range(0), rng);
  const Vec b = Vec::Ones(state.range(0));
  for (auto _ : state)
    benchmark::DoNotOptimize(minres_solve([&](const Vec& v) -> Vec { return a * v; }, b, SymSolveConfig{}));
}
BENCHMARK(BM_Minres)->Arg(144)->Arg(576)->Unit(benchmark::kMillisecond);

void BM_Vbmf(benchmark::State& state) {
  std::mt19937_64 rng(22);
  std::normal_distribution<double> d;
  const Mat m = Mat::NullaryExpr(state.range(0), state.range(1), [&] { return d(rng); });
  for (auto _ : state) benchmark::DoNotOptimize(vbmf(m));
}
BENCHMARK(BM_Vbmf)->Args({64, 576})->Args({256, 2304})->Unit(benchmark::kMillisecond);

}  // namespace
