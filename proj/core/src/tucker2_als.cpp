#include "sigmalr/decomp.hpp"

#include "sigmalr/error.hpp"

#include <Eigen/QR>

#include <cmath>

namespace sigmalr {

namespace {

void check_tucker_ranks(const Tensor4& k, Index rank_t, Index rank_s) {
  const Dims4 d = k.dims();
  require(rank_t >= 1 && rank_t <= d.T,
          "Tucker2 rank R_T=" + std::to_string(rank_t) + " outside [1, " + std::to_string(d.T) + "]");
  require(rank_s >= 1 && rank_s <= d.S,
          "Tucker2 rank R_S=" + std::to_string(rank_s) + " outside [1, " + std::to_string(d.S) + "]");
}

bool converged_step(double prev, double cur, double rel_tol, double scale) {
  if (cur <= 1e-15 * scale) return true;
  return std::abs(prev - cur) <= rel_tol * std::max(prev, 1e-300);
}

// Q factor with a positive-diagonal R; returns (Q, R).
std::pair<Mat, Mat> thin_qr(const Mat& a) {
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ() * Mat::Identity(a.rows(), a.cols());
  Mat r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Index i = 0; i < r.rows(); ++i)
    if (r(i, i) < 0.0) {
      r.row(i) = -r.row(i);
      q.col(i) = -q.col(i);
    }
  return {std::move(q), std::move(r)};
}

// Orthonormalise U_T and U_S, absorbing the triangular factors into the core.
// Leaves the reconstruction unchanged.
void normalise(Tucker2Factors& f) {
  auto [qt, rt] = thin_qr(f.U_T);
  auto [qs, rs] = thin_qr(f.U_S);
  f.G = mode2_product(mode1_product(f.G, rt), rs);
  f.U_T = std::move(qt);
  f.U_S = std::move(qs);
}

double frob_objective(const Tensor4& k, const Tucker2Factors& f) {
  return (k - tucker2_reconstruct(f)).frobenius_norm();
}

double sigma_objective(const Mat& k1, const Tucker2Factors& f, const Mat& l) {
  return ((k1 - unfold_mode(tucker2_reconstruct(f), 1)) * l).norm();
}

// Leading `rank` left singular vectors of `a`; when rank exceeds the column
// count the basis is completed from the orthogonal complement of the range.
Mat leading_basis(const Mat& a, Index rank) {
  const Index lead = std::min(rank, a.cols());
  const Mat u = truncated_svd(a, lead).U;
  if (lead == rank) return u;
  const Mat complement = Mat::Identity(a.rows(), a.rows()) - u * u.transpose();
  Mat q(a.rows(), rank);
  q << u, truncated_svd(complement, rank - lead).U;
  return q;
}

}  // namespace

Tucker2Factors tucker2_hosvd(const Tensor4& k, Index rank_t, Index rank_s) {
  check_tucker_ranks(k, rank_t, rank_s);
  Tucker2Factors f;
  f.U_T = leading_basis(unfold_mode(k, 1), rank_t);
  f.U_S = leading_basis(unfold_mode(k, 2), rank_s);
  f.G = mode2_product(mode1_product(k, f.U_T.transpose()), f.U_S.transpose());
  return f;
}

Tucker2Result tucker2_als(const Tensor4& k, Index rank_t, Index rank_s, const AlsConfig& cfg,
                          const Tucker2Factors* init) {
  cfg.validate();
  check_tucker_ranks(k, rank_t, rank_s);
  Tucker2Result res;
  if (init) {
    require(init->dims() == k.dims() && init->U_T.cols() == rank_t && init->U_S.cols() == rank_s,
            "tucker2_als: initial factors do not match");
    res.factors = *init;
  } else {
    res.factors = tucker2_hosvd(k, rank_t, rank_s);
  }
  Tucker2Factors& f = res.factors;
  const Mat k1 = unfold_mode(k, 1);
  const Mat k2 = unfold_mode(k, 2);
  const double knorm = k.frobenius_norm();

  res.objective.push_back(frob_objective(k, f));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    // K~_(1) = U_T * C, C = (G x_2 U_S)_(1)
    const Mat c = unfold_mode(mode2_product(f.G, f.U_S), 1);
    f.U_T = k1 * c.transpose() * pinv(c * c.transpose());
    res.update_objective.push_back(frob_objective(k, f));

    // K~_(2) = U_S * D, D = (G x_1 U_T)_(2)
    const Mat dm = unfold_mode(mode1_product(f.G, f.U_T), 2);
    f.U_S = k2 * dm.transpose() * pinv(dm * dm.transpose());
    res.update_objective.push_back(frob_objective(k, f));

    f.G = mode2_product(mode1_product(k, pinv(f.U_T)), pinv(f.U_S));
    res.update_objective.push_back(frob_objective(k, f));

    normalise(f);
    res.sweeps = sweep;
    const double cur = frob_objective(k, f);
    const double prev = res.objective.back();
    res.objective.push_back(cur);
    if (converged_step(prev, cur, cfg.rel_tol, knorm)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

namespace sigma_update {

namespace {

void check_sigma(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma) {
  f.validate();
  const Dims4 d = k.dims();
  require(f.dims() == d, "tucker2 update: factor shapes do not match the kernel");
  const Index D = d.S * d.H * d.W;
  require(sigma.rows() == D && sigma.cols() == D, "tucker2 update: Sigma dimension does not match S*H*W");
}

}  // namespace

Mat tucker2_ut(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg) {
  check_sigma(k, f, sigma);
  // P^(T) = (L^T C^T) (x) Id(T) with C = (G x_2 U_S)_(1).
  const Mat c = unfold_mode(mode2_product(f.G, f.U_S), 1);
  const Mat sc = sigma * c.transpose();
  return solve_gram_rows(c * sc, unfold_mode(k, 1) * sc, cfg);
}

Mat tucker2_us(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg) {
  check_sigma(k, f, sigma);
  const Dims4 d = k.dims();
  const Index hw = d.H * d.W;
  const Index rs = f.U_S.cols();
  // K~[t,(s,hw)] = sum_r U_S[s,r] Q[t,r,hw], Q = G x_1 U_T.
  const Mat q = unfold_mode(mode1_product(f.G, f.U_T), 1);  // T x (R_S*HW)
  const Mat qq = q.transpose() * q;                           // (R_S*HW)^2

  const Index n = d.S * rs;
  Mat gram(n, n);
  for (Index r1 = 0; r1 < rs; ++r1)
    for (Index r2 = 0; r2 < rs; ++r2) {
      const auto qblock = qq.block(r1 * hw, r2 * hw, hw, hw);
      for (Index s1 = 0; s1 < d.S; ++s1)
        for (Index s2 = 0; s2 < d.S; ++s2)
          gram(s1 + d.S * r1, s2 + d.S * r2) = sigma.block(s1 * hw, s2 * hw, hw, hw).cwiseProduct(qblock).sum();
    }

  const Mat y = q.transpose() * (unfold_mode(k, 1) * sigma);  // (R_S*HW) x D
  Vec rhs(n);
  for (Index r = 0; r < rs; ++r)
    for (Index s = 0; s < d.S; ++s) rhs(s + d.S * r) = y.block(r * hw, s * hw, hw, hw).trace();

  const Vec x = solve_gram(gram, rhs, cfg);
  return Eigen::Map<const Mat>(x.data(), d.S, rs);
}

Tensor4 tucker2_core(const Tensor4& k, const Tucker2Factors& f, const Mat& sigma, const SymSolveConfig& cfg) {
  check_sigma(k, f, sigma);
  const Dims4 d = k.dims();
  const Index hw = d.H * d.W;
  // K~_(1) = U_T * G_(1) * B^T with B = U_S (x) Id(HW); the Gram of P^(G) factors
  // as (U_T^T U_T) (x) (B^T Sigma B), so the normal equations A X C = Y are
  // solved one Kronecker factor at a time.
  const Mat b = kronecker(f.U_S, Mat::Identity(hw, hw));
  const Mat sb = sigma * b;
  const Mat c = b.transpose() * sb;
  const Mat a = f.U_T.transpose() * f.U_T;
  const Mat y = f.U_T.transpose() * unfold_mode(k, 1) * sb;
  const Mat x1 = solve_gram_rows(c, y, cfg);                                 // X1 C = Y
  const Mat x = solve_gram_rows(a, x1.transpose(), cfg).transpose();        // A X = X1
  return fold_mode(x, 1, {f.U_T.cols(), f.U_S.cols(), d.H, d.W});
}

}  // namespace sigma_update

Tucker2Result tucker2_als_sigma(const Tensor4& k, const SigmaRoot& root, Index rank_t, Index rank_s,
                                const AlsConfig& cfg, const Tucker2Factors* init) {
  cfg.validate();
  check_tucker_ranks(k, rank_t, rank_s);
  const Dims4 d = k.dims();
  require(root.dim() == d.S * d.H * d.W, "tucker2_als_sigma: Sigma root dimension does not match S*H*W");

  Tucker2Result res;
  if (init) {
    require(init->dims() == d && init->U_T.cols() == rank_t && init->U_S.cols() == rank_s,
            "tucker2_als_sigma: initial factors do not match");
    res.factors = *init;
  } else if (cfg.init == InitKind::frobenius_warm_start) {
    res.factors = tucker2_als(k, rank_t, rank_s, cfg).factors;
  } else {
    // Random initialisation is not meaningful for the SVD-initialised Tucker
    // variants; both hosvd and random start from the HOSVD truncation.
    res.factors = tucker2_hosvd(k, rank_t, rank_s);
  }
  Tucker2Factors& f = res.factors;
  const Mat k1 = unfold_mode(k, 1);
  const Mat sigma = root.sigma();
  const double knorm = (k1 * root.L).norm();

  res.objective.push_back(sigma_objective(k1, f, root.L));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    f.U_T = sigma_update::tucker2_ut(k, f, sigma, cfg.solver);
    res.update_objective.push_back(sigma_objective(k1, f, root.L));
    f.U_S = sigma_update::tucker2_us(k, f, sigma, cfg.solver);
    res.update_objective.push_back(sigma_objective(k1, f, root.L));
    f.G = sigma_update::tucker2_core(k, f, sigma, cfg.solver);
    res.update_objective.push_back(sigma_objective(k1, f, root.L));

    normalise(f);
    res.sweeps = sweep;
    const double cur = sigma_objective(k1, f, root.L);
    const double prev = res.objective.back();
    res.objective.push_back(cur);
    if (converged_step(prev, cur, cfg.rel_tol, knorm)) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace sigmalr
