#include "sigmalr/decomp.hpp"

#include "sigmalr/error.hpp"

#include <cmath>
#include <random>

namespace sigmalr {

void AlsConfig::validate() const {
  require(max_sweeps >= 1, "AlsConfig: max_sweeps must be >= 1");
  require(rel_tol > 0.0, "AlsConfig: rel_tol must be > 0");
  solver.validate();
}

Index cp_rank_bound(const Dims4& d) {
  const Index mx = std::max({d.T, d.S, d.H, d.W});
  return d.size() / mx;
}

namespace {

void check_cp_rank(const Tensor4& k, Index rank) {
  const Index bound = cp_rank_bound(k.dims());
  require(rank >= 1 && rank <= bound, "CP rank " + std::to_string(rank) + " outside [1, " + std::to_string(bound) +
                                          "] for kernel " + k.dims().str());
}

Mat random_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

// Factors other than `mode` (1-based), in mode order.
std::vector<Mat> other_factors(const CpFactors& f, int mode) {
  std::vector<Mat> out;
  for (int m = 1; m <= 4; ++m)
    if (m != mode) out.push_back(f.factor(m));
  return out;
}

bool converged_step(double prev, double cur, double rel_tol, double scale) {
  if (cur <= 1e-15 * scale) return true;
  return std::abs(prev - cur) <= rel_tol * std::max(prev, 1e-300);
}

double frob_objective(const Tensor4& k, const CpFactors& f) { return (k - cp_reconstruct(f)).frobenius_norm(); }

double sigma_objective(const Mat& k1, const CpFactors& f, const Mat& l) {
  const Mat z = khatri_rao({f.U_S, f.U_H, f.U_W});
  return ((k1 - f.U_T * z.transpose()) * l).norm();
}

}  // namespace

CpFactors cp_initial_factors(const Tensor4& k, Index rank, InitKind init, std::uint64_t seed) {
  require(rank >= 1, "CP rank must be >= 1");
  std::mt19937_64 rng(seed);
  CpFactors f;
  for (int m = 1; m <= 4; ++m) {
    const Index n = k.dims()[m - 1];
    if (init == InitKind::random) {
      f.factor(m) = random_normal(n, rank, rng);
      continue;
    }
    const Mat unf = unfold_mode(k, m);
    const Index lead = std::min({rank, n, unf.cols()});
    Mat u(n, rank);
    u.leftCols(lead) = truncated_svd(unf, lead).U;
    if (rank > lead) u.rightCols(rank - lead) = random_normal(n, rank - lead, rng);
    f.factor(m) = std::move(u);
  }
  return f;
}

void balance_columns(CpFactors& f) {
  for (Index r = 0; r < f.rank(); ++r) {
    double prod = 1.0;
    std::array<double, 4> norms{};
    for (int m = 1; m <= 4; ++m) {
      norms[static_cast<std::size_t>(m - 1)] = f.factor(m).col(r).norm();
      prod *= norms[static_cast<std::size_t>(m - 1)];
    }
    if (prod == 0.0 || !std::isfinite(prod)) continue;
    const double target = std::pow(prod, 0.25);
    for (int m = 1; m <= 4; ++m) f.factor(m).col(r) *= target / norms[static_cast<std::size_t>(m - 1)];
  }
}

CpResult cp_als(const Tensor4& k, Index rank, const AlsConfig& cfg, const CpFactors* init) {
  cfg.validate();
  check_cp_rank(k, rank);
  CpResult res;
  if (init) {
    require(init->dims() == k.dims() && init->rank() == rank, "cp_als: initial factors do not match");
    res.factors = *init;
  } else {
    const InitKind kind = cfg.init == InitKind::random ? InitKind::random : InitKind::hosvd;
    res.factors = cp_initial_factors(k, rank, kind, cfg.seed);
  }
  CpFactors& f = res.factors;
  const double knorm = k.frobenius_norm();

  std::array<Mat, 4> unfolded;
  for (int m = 1; m <= 4; ++m) unfolded[static_cast<std::size_t>(m - 1)] = unfold_mode(k, m);

  res.objective.push_back(frob_objective(k, f));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    for (int m = 1; m <= 4; ++m) {
      const auto others = other_factors(f, m);
      Mat had = Mat::Ones(rank, rank);
      for (const auto& o : others) had = had.cwiseProduct(o.transpose() * o);
      const Mat kr = khatri_rao(others);
      f.factor(m) = unfolded[static_cast<std::size_t>(m - 1)] * kr * pinv(had);
      res.update_objective.push_back(frob_objective(k, f));
    }
    balance_columns(f);
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

Mat cp_factor(const Tensor4& k, const CpFactors& f, const Mat& sigma, int mode, const SymSolveConfig& cfg) {
  f.validate();
  const Dims4 d = k.dims();
  require(f.dims() == d, "cp_factor: factor shapes do not match the kernel");
  const Index D = d.S * d.H * d.W;
  require(sigma.rows() == D && sigma.cols() == D, "cp_factor: Sigma dimension does not match S*H*W");
  require(mode >= 1 && mode <= 4, "cp_factor: mode must be in 1..4");
  const Index R = f.rank();
  const Mat k1 = unfold_mode(k, 1);

  if (mode == 1) {
    // P^(T) = (L^T Z) (x) Id(T): Gram (Z^T Sigma Z) (x) Id(T), one small system per row of U_T.
    const Mat z = khatri_rao({f.U_S, f.U_H, f.U_W});
    const Mat sz = sigma * z;
    const Mat gram = z.transpose() * sz;
    return solve_gram_rows(gram, k1 * sz, cfg);
  }

  // vec(K~_(1)) is linear in vec(U_n): column (i,r) of the Jacobian is
  // U_T[:,r] (x) a_{r,i}, with a_{r,i} the Kronecker product of the S,H,W
  // columns r where mode n is replaced by the unit vector e_i.
  const Index In = d[mode - 1];
  std::vector<Index> pos(static_cast<std::size_t>(D));
  Mat wts(D, R);
  for (Index s = 0; s < d.S; ++s)
    for (Index h = 0; h < d.H; ++h)
      for (Index w = 0; w < d.W; ++w) {
        const Index dd = (s * d.H + h) * d.W + w;
        pos[static_cast<std::size_t>(dd)] = mode == 2 ? s : (mode == 3 ? h : w);
        for (Index r = 0; r < R; ++r) {
          double p = 1.0;
          if (mode != 2) p *= f.U_S(s, r);
          if (mode != 3) p *= f.U_H(h, r);
          if (mode != 4) p *= f.U_W(w, r);
          wts(dd, r) = p;
        }
      }

  // C_r = Sigma * A_r, A_r = [a_{r,1} ... a_{r,In}].
  std::vector<Mat> c(static_cast<std::size_t>(R), Mat::Zero(D, In));
  for (Index r = 0; r < R; ++r) {
    Mat& cr = c[static_cast<std::size_t>(r)];
    for (Index dd = 0; dd < D; ++dd) cr.col(pos[static_cast<std::size_t>(dd)]) += sigma.col(dd) * wts(dd, r);
  }

  const Mat utu = f.U_T.transpose() * f.U_T;
  const Index n = In * R;
  Mat gram = Mat::Zero(n, n);
  for (Index r1 = 0; r1 < R; ++r1)
    for (Index r2 = r1; r2 < R; ++r2) {
      Mat block = Mat::Zero(In, In);  // A_{r1}^T C_{r2}
      const Mat& c2 = c[static_cast<std::size_t>(r2)];
      for (Index dd = 0; dd < D; ++dd) block.row(pos[static_cast<std::size_t>(dd)]) += wts(dd, r1) * c2.row(dd);
      block *= utu(r1, r2);
      gram.block(r1 * In, r2 * In, In, In) = block;
      if (r2 != r1) gram.block(r2 * In, r1 * In, In, In) = block.transpose();
    }

  const Mat y = f.U_T.transpose() * k1;  // R x D
  Vec rhs(n);
  for (Index r = 0; r < R; ++r)
    rhs.segment(r * In, In) = (y.row(r) * c[static_cast<std::size_t>(r)]).transpose();

  const Vec x = solve_gram(gram, rhs, cfg);
  return Eigen::Map<const Mat>(x.data(), In, R);
}

}  // namespace sigma_update

CpResult cp_als_sigma(const Tensor4& k, const SigmaRoot& root, Index rank, const AlsConfig& cfg,
                      const CpFactors* init) {
  cfg.validate();
  check_cp_rank(k, rank);
  const Dims4 d = k.dims();
  require(root.dim() == d.S * d.H * d.W, "cp_als_sigma: Sigma root dimension does not match S*H*W");

  CpResult res;
  if (init) {
    require(init->dims() == d && init->rank() == rank, "cp_als_sigma: initial factors do not match");
    res.factors = *init;
  } else if (cfg.init == InitKind::frobenius_warm_start) {
    res.factors = cp_als(k, rank, cfg).factors;
  } else {
    res.factors = cp_initial_factors(k, rank, cfg.init, cfg.seed);
  }
  CpFactors& f = res.factors;

  const Mat k1 = unfold_mode(k, 1);
  const Mat sigma = root.sigma();
  const double knorm = (k1 * root.L).norm();

  res.objective.push_back(sigma_objective(k1, f, root.L));
  for (int sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    for (int m = 1; m <= 4; ++m) {
      f.factor(m) = sigma_update::cp_factor(k, f, sigma, m, cfg.solver);
      res.update_objective.push_back(sigma_objective(k1, f, root.L));
    }
    balance_columns(f);
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

CpResult greedy_deflation_sigma(const Tensor4& k, const SigmaRoot& root, Index rank, const AlsConfig& cfg) {
  cfg.validate();
  check_cp_rank(k, rank);
  const Dims4 d = k.dims();
  require(root.dim() == d.S * d.H * d.W, "greedy_deflation_sigma: Sigma root dimension does not match S*H*W");

  CpResult res;
  res.factors.U_T = Mat(d.T, rank);
  res.factors.U_S = Mat(d.S, rank);
  res.factors.U_H = Mat(d.H, rank);
  res.factors.U_W = Mat(d.W, rank);

  Tensor4 residual = k;
  res.objective.push_back(sigma_norm(residual, root));
  for (Index step = 0; step < rank; ++step) {
    const CpResult one = cp_als_sigma(residual, root, 1, cfg);
    residual -= cp_reconstruct(one.factors);
    for (int m = 1; m <= 4; ++m) res.factors.factor(m).col(step) = one.factors.factor(m).col(0);
    res.objective.push_back(sigma_norm(residual, root));
    res.sweeps += one.sweeps;
  }
  res.converged = true;
  return res;
}

}  // namespace sigmalr
