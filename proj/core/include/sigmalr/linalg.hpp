#pragma once

#include "sigmalr/tensor.hpp"

#include <functional>
#include <optional>

namespace sigmalr {

struct SymSolveConfig {
  double tol = 1e-10;            // relative residual ||Ax-b|| / ||b||
  std::optional<Index> max_iters;  // default 10 * dimension
  double epsilon_scale = 1e-6;   // ridge = epsilon_scale * trace(S) / dim
  Index stall_window = 20;

  void validate() const;
  Index iteration_cap(Index dim) const { return max_iters.value_or(10 * std::max<Index>(dim, 1)); }
};

enum class SqrtMethod { cholesky, svd };

struct SqrtResult {
  Mat L;                  // L * L^T = S + epsilon * Id
  double epsilon = 0.0;   // absolute ridge actually added
  bool lower_triangular = false;
};

/// Square root of a symmetric PSD matrix with a relative ridge.
/// Throws CholeskyBreakdown when the regularised matrix is not positive
/// definite and `method` is cholesky.
SqrtResult sym_sqrt(const Mat& s, const SymSolveConfig& cfg, SqrtMethod method);

using LinearOperator = std::function<Vec(const Vec&)>;

struct MinresResult {
  Vec x;
  Index iterations = 0;
  double rel_residual = 0.0;  // recurrence estimate of ||b - Ax|| / ||b||
  bool converged = false;
  bool stalled = false;
};

/// MINRES (Paige & Saunders) for symmetric, possibly indefinite or singular A.
MinresResult minres_solve(const LinearOperator& apply_a, const Vec& b, const SymSolveConfig& cfg);

/// Moore-Penrose pseudo-inverse; singular values below rcond * sigma_max are
/// dropped. A negative rcond selects max(m,n) * machine epsilon.
Mat pinv(const Mat& a, double rcond = -1.0);

struct TruncatedSvd {
  Mat U;  // m x R
  Vec s;  // R, non-increasing
  Mat V;  // n x R

  Mat reconstruct() const { return U * s.asDiagonal() * V.transpose(); }
};

/// Leading R singular triplets. Each left singular vector is signed so that
/// its largest-magnitude entry is positive.
TruncatedSvd truncated_svd(const Mat& a, Index rank);

/// All singular values of `a`, non-increasing.
Vec singular_values(const Mat& a);

struct GramSolveInfo {
  bool used_fallback = false;
  Index minres_iterations = 0;
};

/// Least-squares solution of the system whose normal equations are
/// gram * x = rhs (gram = P^T P, rhs = P^T b). MINRES first; dense pinv when
/// MINRES stalls, fails to converge or leaves a large true residual.
Vec solve_gram(const Mat& gram, const Vec& rhs, const SymSolveConfig& cfg, GramSolveInfo* info = nullptr);

/// Solves X * gram = rhs row by row (gram symmetric), i.e. the normal
/// equations of a Kronecker-structured system (gram (x) Id).
Mat solve_gram_rows(const Mat& gram, const Mat& rhs, const SymSolveConfig& cfg);

}  // namespace sigmalr
