// Empirical variational-Bayes matrix factorisation, global analytic solution
// for fully observed matrices with isotropic Gaussian noise.
//
// With L <= M, alpha = L/M, a singular value gamma is retained iff
//   gamma > sigma * sqrt(M * (1 + tau_bar) * (1 + alpha / tau_bar)).
// When sigma^2 is unknown it minimises the free energy
//   sum_{x_h <= x_bar} [x_h + log sigma^2]
//   + sum_{x_h > x_bar} [x_h - tau_h + log(tau_h + 1) + alpha log(tau_h/alpha + 1) + log sigma^2]
// with x_h = gamma_h^2 / (M sigma^2) (terms constant in sigma^2 dropped).

#include "sigmalr/error.hpp"
#include "sigmalr/linalg.hpp"
#include "sigmalr/rank_select.hpp"

#include <cmath>
#include <numeric>

namespace sigmalr {

namespace {

double phi(double z) { return std::log1p(z) / z - 0.5; }

struct Problem {
  Vec s;  // singular values, non-increasing, length L
  double l = 0, m = 0, alpha = 0, x_bar = 0;
};

double tau(double x, double alpha) {
  const double a = x - (1.0 + alpha);
  return 0.5 * (a + std::sqrt(std::max(a * a - 4.0 * alpha, 0.0)));
}

double free_energy(const Problem& p, double sigma2) {
  const double log_s2 = std::log(sigma2);
  double f = 0.0;
  for (Index h = 0; h < p.s.size(); ++h) {
    const double x = p.s(h) * p.s(h) / (p.m * sigma2);
    if (x > p.x_bar) {
      const double t = tau(x, p.alpha);
      f += x - t + std::log1p(t) + p.alpha * std::log1p(t / p.alpha) + log_s2;
    } else {
      f += x + log_s2;
    }
  }
  return f;
}

double estimate_noise(const Problem& p) {
  const Index L = p.s.size();
  const double total = p.s.squaredNorm();
  const double upper = total / (p.l * p.m);
  Index idx = static_cast<Index>(std::ceil(p.l / (1.0 + p.alpha))) - 1;
  idx = std::clamp<Index>(idx, 0, L - 1);
  const double tail_mean = p.s.tail(L - idx).squaredNorm() / static_cast<double>(L - idx);
  double lower = std::max(p.s(idx) * p.s(idx) / (p.m * p.x_bar), tail_mean / p.m);
  lower = std::max(lower, 1e-12 * upper);
  if (lower >= upper) return upper;

  // Log-spaced grid, then golden-section refinement around the best point.
  constexpr int kGrid = 64;
  const double a = std::log(lower);
  const double b = std::log(upper);
  const double step = (b - a) / (kGrid - 1);
  int best = 0;
  double best_f = free_energy(p, lower);
  for (int i = 1; i < kGrid; ++i) {
    const double f = free_energy(p, std::exp(a + step * i));
    if (f < best_f) {
      best_f = f;
      best = i;
    }
  }
  double lo = a + step * std::max(best - 1, 0);
  double hi = a + step * std::min(best + 1, kGrid - 1);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = free_energy(p, std::exp(c));
  double fd = free_energy(p, std::exp(d));
  for (int it = 0; it < 200 && (hi - lo) > 1e-12; ++it) {
    if (fc <= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = free_energy(p, std::exp(c));
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = free_energy(p, std::exp(d));
    }
  }
  const double x = 0.5 * (lo + hi);
  // Never return something worse than the grid optimum.
  return free_energy(p, std::exp(x)) <= best_f ? std::exp(x) : std::exp(a + step * best);
}

}  // namespace

double vbmf_tau_bar(double alpha) {
  require(alpha > 0.0 && alpha <= 1.0, "vbmf_tau_bar: alpha must be in (0, 1]");
  const auto xi = [alpha](double t) { return phi(t) + phi(t / alpha); };
  double lo = 1e-8;
  double hi = 1.0;
  while (xi(hi) > 0.0) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (xi(mid) > 0.0 ? lo : hi) = mid;
    if (hi - lo <= 1e-15 * hi) break;
  }
  return 0.5 * (lo + hi);
}

VbmfResult vbmf(const Mat& m, std::optional<double> noise_variance) {
  require(m.rows() > 0 && m.cols() > 0, "vbmf: matrix must be non-empty");
  require(m.allFinite(), "vbmf: matrix must be finite");
  require(!noise_variance || *noise_variance > 0.0, "vbmf: noise variance must be positive");

  Problem p;
  p.l = static_cast<double>(std::min(m.rows(), m.cols()));
  p.m = static_cast<double>(std::max(m.rows(), m.cols()));
  p.alpha = p.l / p.m;
  p.s = singular_values(m);
  const double tb = vbmf_tau_bar(p.alpha);
  p.x_bar = (1.0 + tb) * (1.0 + p.alpha / tb);

  VbmfResult out;
  if (p.s(0) == 0.0) return out;

  out.noise_variance = noise_variance ? *noise_variance : estimate_noise(p);
  out.threshold = std::sqrt(p.m * out.noise_variance * p.x_bar);
  out.rank = static_cast<Index>((p.s.array() > out.threshold).count());
  return out;
}

Index vbmf_rank(const Mat& m, std::optional<double> noise_variance) { return vbmf(m, noise_variance).rank; }

}  // namespace sigmalr
