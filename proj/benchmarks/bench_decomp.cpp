#include "sigmalr/covariance.hpp"
#include "sigmalr/decomp.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace sigmalr;

struct Problem {
  Tensor4 k;
  Mat sigma;
  SigmaRoot root;
};

// Kernel (T,S,3,3) with T = S = state.range(0); Sigma from correlated patches.
Problem make_problem(Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Problem p;
  p.k = Tensor4({c, c, 3, 3});
  for (double& v : p.k.data()) v = n(rng);
  const Index dim = c * 9;
  const Mat mix = Mat::NullaryExpr(dim, dim, [&] { return n(rng); });
  const Mat patches = mix * Mat::NullaryExpr(dim, 4 * dim, [&] { return n(rng); });
  SigmaAccumulator acc(dim);
  acc.add(patches);
  p.sigma = acc.finalize();
  p.root = SigmaRoot::from_sigma(p.sigma, SymSolveConfig{});
  return p;
}

AlsConfig one_sweep() {
  AlsConfig cfg;
  cfg.max_sweeps = 1;
  cfg.rel_tol = 1e-300;  // never stops early
  return cfg;
}

void BM_CpAlsSweep(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 10);
  const CpFactors init = cp_initial_factors(p.k, state.range(1), InitKind::hosvd, 0);
  for (auto _ : state) benchmark::DoNotOptimize(cp_als(p.k, state.range(1), one_sweep(), &init));
}
BENCHMARK(BM_CpAlsSweep)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_CpAlsSigmaSweep(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 11);
  const CpFactors init = cp_initial_factors(p.k, state.range(1), InitKind::hosvd, 0);
  for (auto _ : state) benchmark::DoNotOptimize(cp_als_sigma(p.k, p.root, state.range(1), one_sweep(), &init));
}
BENCHMARK(BM_CpAlsSigmaSweep)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_Tucker2AlsSigmaSweep(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 12);
  const Index r = state.range(1);
  const Tucker2Factors init = tucker2_hosvd(p.k, r, r);
  for (auto _ : state) benchmark::DoNotOptimize(tucker2_als_sigma(p.k, p.root, r, r, one_sweep(), &init));
}
BENCHMARK(BM_Tucker2AlsSigmaSweep)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_CpFactorUpdateT(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 13);
  const CpFactors f = cp_initial_factors(p.k, state.range(1), InitKind::hosvd, 0);
  for (auto _ : state) benchmark::DoNotOptimize(sigma_update::cp_factor(p.k, f, p.sigma, 1, SymSolveConfig{}));
}
BENCHMARK(BM_CpFactorUpdateT)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

void BM_SvdSigma(benchmark::State& state) {
  const Problem p = make_problem(state.range(0), 14);
  const Mat w = unfold_mode(p.k, 1);
  for (auto _ : state) benchmark::DoNotOptimize(svd_sigma(w, p.root, state.range(1)));
}
BENCHMARK(BM_SvdSigma)->Args({16, 8})->Args({32, 16})->Unit(benchmark::kMillisecond);

}  // namespace
