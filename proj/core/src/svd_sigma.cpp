#include "sigmalr/decomp.hpp"

#include "sigmalr/error.hpp"

#include <Eigen/LU>

namespace sigmalr {

SvdFactors svd_sigma(const Mat& w, const SigmaRoot& root, Index rank) {
  require(root.dim() == w.cols(), "svd_sigma: Sigma root dimension does not match the weight columns");
  require(rank >= 1 && rank <= std::min(w.rows(), w.cols()),
          "svd_sigma: rank " + std::to_string(rank) + " outside [1, min(m,n)]");

  const TruncatedSvd t = truncated_svd(w * root.L, rank);
  // B = diag(s) V^T L^{-1}, computed as the solution of B L = diag(s) V^T.
  const Mat rhs = t.s.asDiagonal() * t.V.transpose();
  Mat b;
  if (root.lower_triangular) {
    if ((root.L.diagonal().array() == 0.0).any())
      throw NumericalError("svd_sigma: Sigma root is singular; increase epsilon");
    // B L = RHS  <=>  L^T B^T = RHS^T with L^T upper triangular.
    b = root.L.transpose().triangularView<Eigen::Upper>().solve(rhs.transpose()).transpose();
  } else {
    Eigen::FullPivLU<Mat> lu(root.L.transpose());
    if (!lu.isInvertible()) throw NumericalError("svd_sigma: Sigma root is singular; increase epsilon");
    b = lu.solve(rhs.transpose()).transpose();
  }
  if (!b.allFinite()) throw NumericalError("svd_sigma: non-finite factor; increase epsilon");
  return {t.U, std::move(b)};
}

}  // namespace sigmalr
