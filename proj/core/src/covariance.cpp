#include "sigmalr/covariance.hpp"

#include "sigmalr/error.hpp"

namespace sigmalr {

SigmaAccumulator::SigmaAccumulator(Index dim) : dim_(dim), sum_(Mat::Zero(dim, dim)) {
  require(dim > 0, "SigmaAccumulator: dimension must be positive");
}

void SigmaAccumulator::add(const Mat& patches) {
  require(patches.rows() == dim_, "SigmaAccumulator: patch row dimension " + std::to_string(patches.rows()) +
                                      " does not match " + std::to_string(dim_));
  if (patches.cols() == 0) return;
  sum_.noalias() += patches * patches.transpose();
  // Keep the stored sum exactly symmetric.
  sum_ = 0.5 * (sum_ + sum_.transpose()).eval();
  count_ += patches.cols();
}

void SigmaAccumulator::merge(const SigmaAccumulator& other) {
  if (other.dim_ == 0) return;
  if (dim_ == 0) {
    *this = other;
    return;
  }
  require(other.dim_ == dim_, "SigmaAccumulator: cannot merge accumulators of different dimension");
  sum_ += other.sum_;
  count_ += other.count_;
}

Mat SigmaAccumulator::finalize(Normalization norm) const {
  require(dim_ > 0, "SigmaAccumulator: nothing accumulated");
  if (norm == Normalization::sum) return sum_;
  require(count_ > 0, "SigmaAccumulator: mean normalisation needs at least one patch");
  return sum_ / static_cast<double>(count_);
}

SigmaAccumulator estimate_sigma(std::span<const Mat> patch_batches) {
  require(!patch_batches.empty(), "estimate_sigma: no patch batches");
  SigmaAccumulator acc(patch_batches.front().rows());
  for (const auto& p : patch_batches) acc.add(p);
  return acc;
}

SigmaRoot SigmaRoot::identity(Index dim) {
  SigmaRoot r;
  r.L = Mat::Identity(dim, dim);
  r.lower_triangular = true;
  r.dataset_id = "identity";
  return r;
}

SigmaRoot SigmaRoot::from_sigma(const Mat& sigma, const SymSolveConfig& cfg, SqrtMethod method) {
  SqrtResult sq = sym_sqrt(sigma, cfg, method);
  SigmaRoot r;
  r.L = std::move(sq.L);
  r.epsilon = sq.epsilon;
  r.lower_triangular = sq.lower_triangular;
  return r;
}

SigmaRoot SigmaRoot::from_sigma(const Mat& sigma, const SymSolveConfig& cfg) {
  try {
    return from_sigma(sigma, cfg, SqrtMethod::cholesky);
  } catch (const CholeskyBreakdown&) {
    return from_sigma(sigma, cfg, SqrtMethod::svd);
  }
}

double sigma_norm(const Tensor4& k, const SigmaRoot& root) {
  const Dims4 d = k.dims();
  require(root.dim() == d.S * d.H * d.W, "sigma_norm: root dimension does not match S*H*W");
  return (unfold_mode(k, 1) * root.L).norm();
}

double sigma_norm(const Tensor4& k, const Tensor4& k_tilde, const SigmaRoot& root) {
  require(k.dims() == k_tilde.dims(), "sigma_norm: kernel dimension mismatch");
  return sigma_norm(k - k_tilde, root);
}

double relative_recon_error(const Tensor4& k, const Tensor4& k_tilde, const SigmaRoot* root) {
  require(k.dims() == k_tilde.dims(), "relative_recon_error: kernel dimension mismatch");
  const double denom = root ? sigma_norm(k, *root) : k.frobenius_norm();
  require(denom > 0.0, "relative_recon_error: original kernel has zero norm");
  const Tensor4 diff = k - k_tilde;
  const double num = root ? sigma_norm(diff, *root) : diff.frobenius_norm();
  return num / denom;
}

}  // namespace sigmalr
