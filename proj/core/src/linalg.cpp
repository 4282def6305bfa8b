#include "sigmalr/linalg.hpp"

#include "sigmalr/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace sigmalr {

namespace {

void check_symmetric(const Mat& s) {
  require(s.rows() == s.cols(), "sym_sqrt: matrix must be square");
  require(s.rows() > 0, "sym_sqrt: empty matrix");
  const double scale = std::max(s.norm(), std::numeric_limits<double>::min());
  require((s - s.transpose()).norm() <= 1e-8 * scale, "sym_sqrt: matrix is not symmetric");
}

Eigen::BDCSVD<Mat> thin_svd(const Mat& a) {
  return Eigen::BDCSVD<Mat>(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace

SqrtResult sym_sqrt(const Mat& s, const SymSolveConfig& cfg, SqrtMethod method) {
  cfg.validate();
  check_symmetric(s);
  const Index n = s.rows();
  Mat sym = 0.5 * (s + s.transpose());
  SqrtResult out;
  out.epsilon = cfg.epsilon_scale * sym.trace() / static_cast<double>(n);
  if (out.epsilon < 0.0) out.epsilon = 0.0;
  sym.diagonal().array() += out.epsilon;

  if (method == SqrtMethod::cholesky) {
    Eigen::LLT<Mat> llt(sym);
    if (llt.info() != Eigen::Success)
      throw CholeskyBreakdown("sym_sqrt: Cholesky failed; matrix is not positive definite after regularisation");
    out.L = llt.matrixL();
    if (!out.L.allFinite() || (out.L.diagonal().array() <= 0.0).any())
      throw CholeskyBreakdown("sym_sqrt: Cholesky produced a singular factor");
    out.lower_triangular = true;
    return out;
  }

  Eigen::SelfAdjointEigenSolver<Mat> eig(sym);
  if (eig.info() != Eigen::Success) throw NumericalError("sym_sqrt: eigendecomposition failed");
  const Vec root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  out.L = eig.eigenvectors() * root.asDiagonal();
  out.lower_triangular = false;
  return out;
}

Mat pinv(const Mat& a, double rcond) {
  if (a.size() == 0) return Mat(a.cols(), a.rows());
  const auto svd = thin_svd(a);
  const Vec& s = svd.singularValues();
  if (rcond < 0.0)
    rcond = static_cast<double>(std::max(a.rows(), a.cols())) * std::numeric_limits<double>::epsilon();
  const double cut = rcond * (s.size() > 0 ? s(0) : 0.0);
  Vec inv = Vec::Zero(s.size());
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Vec singular_values(const Mat& a) {
  if (a.size() == 0) return Vec();
  return Eigen::BDCSVD<Mat>(a).singularValues();
}

TruncatedSvd truncated_svd(const Mat& a, Index rank) {
  const Index kmax = std::min(a.rows(), a.cols());
  require(rank >= 1 && rank <= kmax,
          "truncated_svd: rank " + std::to_string(rank) + " outside [1, " + std::to_string(kmax) + "]");
  const auto svd = thin_svd(a);
  TruncatedSvd out;
  out.U = svd.matrixU().leftCols(rank);
  out.s = svd.singularValues().head(rank);
  out.V = svd.matrixV().leftCols(rank);
  for (Index j = 0; j < rank; ++j) {
    Index imax = 0;
    out.U.col(j).cwiseAbs().maxCoeff(&imax);
    if (out.U(imax, j) < 0.0) {
      out.U.col(j) = -out.U.col(j);
      out.V.col(j) = -out.V.col(j);
    }
  }
  return out;
}

Vec solve_gram(const Mat& gram, const Vec& rhs, const SymSolveConfig& cfg, GramSolveInfo* info) {
  require(gram.rows() == gram.cols(), "solve_gram: Gram matrix must be square");
  require(gram.rows() == rhs.size(), "solve_gram: right-hand side size mismatch");
  if (!gram.allFinite()) throw NumericalError("solve_gram: Gram matrix is not finite");

  const auto op = [&gram](const Vec& v) -> Vec { return gram.selfadjointView<Eigen::Upper>() * v; };
  MinresResult mr = minres_solve(op, rhs, cfg);
  if (info) info->minres_iterations = mr.iterations;

  const double bnorm = rhs.norm();
  bool accept = mr.converged && !mr.stalled;
  if (accept && bnorm > 0.0) {
    const double true_rel = (gram * mr.x - rhs).norm() / bnorm;
    accept = true_rel <= 10.0 * cfg.tol;
  }
  if (accept) {
    if (info) info->used_fallback = false;
    return mr.x;
  }
  if (info) info->used_fallback = true;
  Vec x = pinv(gram) * rhs;
  if (!x.allFinite()) throw NumericalError("solve_gram: pseudo-inverse fallback produced non-finite values");
  return x;
}

Mat solve_gram_rows(const Mat& gram, const Mat& rhs, const SymSolveConfig& cfg) {
  require(rhs.cols() == gram.rows(), "solve_gram_rows: right-hand side width mismatch");
  Mat out(rhs.rows(), rhs.cols());
  for (Index i = 0; i < rhs.rows(); ++i) out.row(i) = solve_gram(gram, rhs.row(i).transpose(), cfg).transpose();
  return out;
}

}  // namespace sigmalr
