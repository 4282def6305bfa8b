#pragma once

// Low-rank decompositions of kernel tensors and weight matrices.
//
// Frobenius baselines (cp_als, tucker2_als) and their distribution-aware
// counterparts (cp_als_sigma, tucker2_als_sigma) which minimise
// ||unfold_1(K - K~) L||_F for a square root L of the input-patch second
// moment. Each factor update of the Sigma variants is the least-squares
// solution of a Kronecker-structured system; its Gram matrix P^T P and
// right-hand side P^T vec(K L) are assembled without forming P and handed to
// solve_gram.

#include "sigmalr/covariance.hpp"
#include "sigmalr/linalg.hpp"
#include "sigmalr/tensor.hpp"

#include <cstdint>
#include <vector>

namespace sigmalr {

enum class InitKind { frobenius_warm_start, hosvd, random };

struct AlsConfig {
  int max_sweeps = 50;
  double rel_tol = 1e-6;
  InitKind init = InitKind::frobenius_warm_start;
  std::uint64_t seed = 0;
  SymSolveConfig solver{};

  void validate() const;
};

struct CpResult {
  CpFactors factors;
  std::vector<double> objective;         // [initial, after sweep 1, ...]
  std::vector<double> update_objective;  // after every single factor update
  int sweeps = 0;
  bool converged = false;
};

struct Tucker2Result {
  Tucker2Factors factors;
  std::vector<double> objective;
  std::vector<double> update_objective;
  int sweeps = 0;
  bool converged = false;
};

struct SvdFactors {
  Mat A;  // m x R
  Mat B;  // R x n

  Index rank() const { return A.cols(); }
  Mat reconstruct() const { return A * B; }
  Index parameter_count() const { return A.size() + B.size(); }
};

/// Upper bound on the CP rank considered meaningful: floor(TSHW / max(T,S,H,W)).
Index cp_rank_bound(const Dims4& d);

/// Deterministic CP initialisation: leading left singular vectors of each
/// unfolding, seeded normal columns where R exceeds the mode size; `random`
/// draws every factor from a seeded normal.
CpFactors cp_initial_factors(const Tensor4& k, Index rank, InitKind init, std::uint64_t seed);

/// HOSVD truncation: leading singular vectors of the mode-1 and mode-2
/// unfoldings with the projected core.
Tucker2Factors tucker2_hosvd(const Tensor4& k, Index rank_t, Index rank_s);

/// Rescales the columns of every factor to share the norm of each rank-1 term.
void balance_columns(CpFactors& f);

CpResult cp_als(const Tensor4& k, Index rank, const AlsConfig& cfg, const CpFactors* init = nullptr);
CpResult cp_als_sigma(const Tensor4& k, const SigmaRoot& root, Index rank, const AlsConfig& cfg,
                      const CpFactors* init = nullptr);

Tucker2Result tucker2_als(const Tensor4& k, Index rank_t, Index rank_s, const AlsConfig& cfg,
                          const Tucker2Factors* init = nullptr);
Tucker2Result tucker2_als_sigma(const Tensor4& k, const SigmaRoot& root, Index rank_t, Index rank_s,
                                const AlsConfig& cfg, const Tucker2Factors* init = nullptr);

/// Greedy deflation: R successive rank-1 CP-ALS-Sigma fits of the residual.
/// `objective` holds the residual Sigma norm before the first and after each
/// deflation step.
CpResult greedy_deflation_sigma(const Tensor4& k, const SigmaRoot& root, Index rank, const AlsConfig& cfg);

/// Rank-R minimiser of ||(W - W~) L||_F (globally optimal, Eckart-Young in
/// the whitened coordinates). `root` acts on the column space of W.
SvdFactors svd_sigma(const Mat& w, const SigmaRoot& root, Index rank);

/// Tucker2 fit of the element-weighted objective ||H o (K - K~)||_F by
/// majorisation-imputation. The trace records ||H o (K - K~)||_F.
Tucker2Result wals_tucker2(const Tensor4& k, const Tensor4& weights, Index rank_t, Index rank_s,
                           const AlsConfig& cfg);

/// Single factor updates of the Sigma algorithms, exposed for verification.
namespace sigma_update {

/// New factor for CP mode `mode` (1=T, 2=S, 3=H, 4=W) with the others fixed.
Mat cp_factor(const Tensor4& k, const CpFactors& f, const Mat& sigma, int mode, const SymSolveConfig& cfg);

Mat tucker2_ut(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg);
Mat tucker2_us(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg);
Tensor4 tucker2_core(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg);

}  // namespace sigma_update

}  // namespace sigmalr
