#pragma once

// Second-moment matrix of unfolded input patches and the distribution-aware
// ("Sigma") norm built from its square root.

#include "sigmalr/linalg.hpp"
#include "sigmalr/tensor.hpp"

#include <span>
#include <string>

namespace sigmalr {

enum class Normalization { mean, sum };

class SigmaAccumulator {
public:
  SigmaAccumulator() = default;
  explicit SigmaAccumulator(Index dim);

  Index dim() const { return dim_; }
  Index count() const { return count_; }
  const Mat& sum_matrix() const { return sum_; }

  /// Adds u * u^T for every column u of `patches` (dim x n).
  void add(const Mat& patches);
  /// Exact merge of an accumulator filled from a disjoint batch.
  void merge(const SigmaAccumulator& other);

  Mat finalize(Normalization norm = Normalization::mean) const;

private:
  Index dim_ = 0;
  Index count_ = 0;
  Mat sum_;
};

SigmaAccumulator estimate_sigma(std::span<const Mat> patch_batches);

struct SigmaRoot {
  Mat L;
  double epsilon = 0.0;
  bool lower_triangular = false;
  std::string dataset_id;
  Index sample_count = 0;

  Index dim() const { return L.rows(); }

  static SigmaRoot identity(Index dim);
  /// Cholesky first; eigendecomposition when Cholesky breaks down.
  static SigmaRoot from_sigma(const Mat& sigma, const SymSolveConfig& cfg);
  static SigmaRoot from_sigma(const Mat& sigma, const SymSolveConfig& cfg, SqrtMethod method);

  /// L * L^T.
  Mat sigma() const { return L * L.transpose(); }
};

/// ||unfold_1(K - K_tilde) * L||_F.
double sigma_norm(const Tensor4& k, const Tensor4& k_tilde, const SigmaRoot& root);
/// ||unfold_1(K) * L||_F.
double sigma_norm(const Tensor4& k, const SigmaRoot& root);

/// Relative error ||K - K~|| / ||K|| in the Frobenius norm (root == nullptr)
/// or the Sigma norm.
double relative_recon_error(const Tensor4& k, const Tensor4& k_tilde, const SigmaRoot* root = nullptr);

}  // namespace sigmalr
