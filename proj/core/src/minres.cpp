// MINRES for symmetric systems, following the Paige-Saunders recurrences
// (Lanczos tridiagonalisation + QR by Givens rotations). No preconditioner.

#include "sigmalr/error.hpp"
#include "sigmalr/linalg.hpp"

#include <cmath>
#include <limits>

namespace sigmalr {

void SymSolveConfig::validate() const {
  require(tol > 0.0, "SymSolveConfig: tol must be > 0");
  require(!max_iters || *max_iters >= 1, "SymSolveConfig: max_iters must be >= 1");
  require(epsilon_scale >= 0.0, "SymSolveConfig: epsilon_scale must be >= 0");
  require(stall_window >= 1, "SymSolveConfig: stall_window must be >= 1");
}

MinresResult minres_solve(const LinearOperator& apply_a, const Vec& b, const SymSolveConfig& cfg) {
  cfg.validate();
  const Index n = b.size();
  if (!b.allFinite()) throw NumericalError("minres: right-hand side is not finite");

  MinresResult res;
  res.x = Vec::Zero(n);
  const double beta1 = b.norm();
  if (beta1 == 0.0) {
    res.converged = true;
    return res;
  }

  const double eps = std::numeric_limits<double>::epsilon();
  const Index max_iters = cfg.iteration_cap(n);

  Vec r1 = b;
  Vec r2 = b;
  Vec y = b;
  Vec w = Vec::Zero(n);
  Vec w1 = Vec::Zero(n);
  Vec w2 = Vec::Zero(n);

  double oldb = 0.0;
  double beta = beta1;
  double dbar = 0.0;
  double epsln = 0.0;
  double phibar = beta1;
  double cs = -1.0;
  double sn = 0.0;

  double best = 1.0;
  Index best_iter = 0;

  for (Index itn = 1; itn <= max_iters; ++itn) {
    res.iterations = itn;
    const Vec v = y / beta;
    y = apply_a(v);
    if (y.size() != n) throw ValidationError("minres: operator returned a vector of the wrong size");
    if (itn >= 2) y -= (beta / oldb) * r1;

    const double alfa = v.dot(y);
    y -= (alfa / beta) * r2;
    r1 = r2;
    r2 = y;
    oldb = beta;
    beta = r2.norm();

    // Apply the previous rotation, then compute and apply the new one.
    const double oldeps = epsln;
    const double delta = cs * dbar + sn * alfa;
    const double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;

    const double gamma = std::max(std::hypot(gbar, beta), eps);
    cs = gbar / gamma;
    sn = beta / gamma;
    const double phi = cs * phibar;
    phibar = sn * phibar;

    w1 = w2;
    w2 = w;
    w = (v - oldeps * w1 - delta * w2) / gamma;
    res.x += phi * w;

    if (!std::isfinite(phibar) || !std::isfinite(alfa))
      throw NumericalError("minres: non-finite value encountered");

    res.rel_residual = std::abs(phibar) / beta1;
    if (res.rel_residual <= cfg.tol) {
      res.converged = true;
      break;
    }
    // Krylov space exhausted: the current iterate is the minimum-residual
    // solution over the whole reachable subspace.
    if (beta <= eps * beta1) {
      res.converged = true;
      break;
    }
    if (res.rel_residual < best * (1.0 - 1e-3)) {
      best = res.rel_residual;
      best_iter = itn;
    } else if (itn - best_iter >= cfg.stall_window) {
      res.stalled = true;
      break;
    }
  }
  if (!res.x.allFinite()) throw NumericalError("minres: iterate is not finite");
  return res;
}

}  // namespace sigmalr
