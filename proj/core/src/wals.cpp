#include "sigmalr/decomp.hpp"

#include "sigmalr/error.hpp"

#include <cmath>

namespace sigmalr {

namespace {

constexpr int kInnerSweeps = 10;

double weighted_objective(const Tensor4& k, const Tensor4& weights, const Tucker2Factors& f) {
  return hadamard(weights, k - tucker2_reconstruct(f)).frobenius_norm();
}

}  // namespace

Tucker2Result wals_tucker2(const Tensor4& k, const Tensor4& weights, Index rank_t, Index rank_s,
                           const AlsConfig& cfg) {
  cfg.validate();
  require(weights.dims() == k.dims(), "wals_tucker2: weights must have the kernel's dimensions");
  const auto wv = weights.flat();
  require((wv.array() >= 0.0).all() && wv.allFinite(), "wals_tucker2: weights must be finite and non-negative");
  const double wmax = wv.maxCoeff();
  require(wmax > 0.0, "wals_tucker2: weights are all zero");

  // Squared-error weights in [0,1]; the surrogate ||X - K~||^2 with
  // X = Hn o K + (1 - Hn) o K~ majorises sum Hn (K - K~)^2.
  Tensor4 hn(k.dims());
  hn.flat() = (wv / wmax).array().square().matrix();

  AlsConfig inner = cfg;
  inner.max_sweeps = std::min(cfg.max_sweeps, kInnerSweeps);

  Tucker2Result res;
  res.factors = tucker2_als(k, rank_t, rank_s, cfg).factors;
  Tucker2Factors& f = res.factors;
  const double scale = hadamard(weights, k).frobenius_norm();

  res.objective.push_back(weighted_objective(k, weights, f));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    const Tensor4 approx = tucker2_reconstruct(f);
    Tensor4 x(k.dims());
    x.flat() = hn.flat().cwiseProduct(k.flat()) +
               (Vec::Ones(k.size()) - hn.flat()).cwiseProduct(approx.flat());
    f = tucker2_als(x, rank_t, rank_s, inner, &f).factors;

    res.sweeps = sweep;
    const double cur = weighted_objective(k, weights, f);
    res.update_objective.push_back(cur);
    const double prev = res.objective.back();
    res.objective.push_back(cur);
    if (cur <= 1e-15 * scale || std::abs(prev - cur) <= cfg.rel_tol * std::max(prev, 1e-300)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace sigmalr
