#include "sigmalr/tensor.hpp"

#include "sigmalr/error.hpp"

#include <sstream>
#include <utility>

namespace sigmalr {

Index Dims4::operator[](int mode) const {
  switch (mode) {
    case 0: return T;
    case 1: return S;
    case 2: return H;
    case 3: return W;
  }
  throw ValidationError("Dims4: mode index out of range");
}

std::string Dims4::str() const {
  std::ostringstream os;
  os << '(' << T << ',' << S << ',' << H << ',' << W << ')';
  return os.str();
}

Tensor4::Tensor4(Dims4 dims) : dims_(dims) {
  require(dims.T > 0 && dims.S > 0 && dims.H > 0 && dims.W > 0,
          "Tensor4: dimensions must be positive, got " + dims.str());
  data_.assign(static_cast<std::size_t>(dims.size()), 0.0);
}

Tensor4::Tensor4(Dims4 dims, std::vector<double> data) : Tensor4(dims) {
  require(static_cast<Index>(data.size()) == dims.size(),
          "Tensor4: data length does not match dims " + dims.str());
  data_ = std::move(data);
}

Tensor4& Tensor4::operator+=(const Tensor4& other) {
  require(dims_ == other.dims_, "Tensor4 +=: dimension mismatch");
  flat() += other.flat();
  return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& other) {
  require(dims_ == other.dims_, "Tensor4 -=: dimension mismatch");
  flat() -= other.flat();
  return *this;
}

Tensor4& Tensor4::operator*=(double c) {
  flat() *= c;
  return *this;
}

Tensor4 operator+(Tensor4 a, const Tensor4& b) { return a += b; }
Tensor4 operator-(Tensor4 a, const Tensor4& b) { return a -= b; }
Tensor4 operator*(double c, Tensor4 a) { return a *= c; }

Tensor4 hadamard(const Tensor4& a, const Tensor4& b) {
  require(a.dims() == b.dims(), "hadamard: dimension mismatch");
  Tensor4 out(a.dims());
  out.flat() = a.flat().cwiseProduct(b.flat());
  return out;
}

namespace {

void check_mode(int mode) {
  require(mode >= 1 && mode <= 4, "unfold/fold: mode must be in 1..4, got " + std::to_string(mode));
}

// Visits every element with (row, col) of the mode-n unfolding.
template <typename F>
void for_each_unfolded(const Dims4& d, int mode, F&& f) {
  const auto n = d.as_array();
  const int m = mode - 1;
  std::array<Index, 4> stride{};
  Index s = 1;
  for (int k = 3; k >= 0; --k) {
    if (k == m) continue;
    stride[static_cast<std::size_t>(k)] = s;
    s *= n[static_cast<std::size_t>(k)];
  }
  Index flat = 0;
  std::array<Index, 4> idx{};
  for (idx[0] = 0; idx[0] < n[0]; ++idx[0])
    for (idx[1] = 0; idx[1] < n[1]; ++idx[1])
      for (idx[2] = 0; idx[2] < n[2]; ++idx[2])
        for (idx[3] = 0; idx[3] < n[3]; ++idx[3], ++flat) {
          Index col = 0;
          for (int k = 0; k < 4; ++k)
            if (k != m) col += idx[static_cast<std::size_t>(k)] * stride[static_cast<std::size_t>(k)];
          f(flat, idx[static_cast<std::size_t>(m)], col);
        }
}

}  // namespace

Mat unfold_mode(const Tensor4& k, int mode) {
  check_mode(mode);
  const Dims4& d = k.dims();
  if (mode == 1) {
    // Row-major T x SHW is exactly the storage order.
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        k.data().data(), d.T, d.S * d.H * d.W);
  }
  const Index rows = d[mode - 1];
  Mat out(rows, d.size() / rows);
  const auto data = k.data();
  for_each_unfolded(d, mode, [&](Index flat, Index r, Index c) {
    out(r, c) = data[static_cast<std::size_t>(flat)];
  });
  return out;
}

Tensor4 fold_mode(const Mat& m, int mode, Dims4 dims) {
  check_mode(mode);
  require(dims.size() > 0, "fold_mode: invalid dims " + dims.str());
  const Index rows = dims[mode - 1];
  require(m.rows() == rows && m.cols() == dims.size() / rows,
          "fold_mode: matrix shape does not match dims " + dims.str() + " for mode " + std::to_string(mode));
  Tensor4 out(dims);
  auto data = out.data();
  for_each_unfolded(dims, mode, [&](Index flat, Index r, Index c) {
    data[static_cast<std::size_t>(flat)] = m(r, c);
  });
  return out;
}

Mat khatri_rao(std::span<const Mat> factors) {
  require(factors.size() >= 2, "khatri_rao: need at least two factors");
  const Index r = factors[0].cols();
  for (const auto& f : factors)
    require(f.cols() == r, "khatri_rao: factors must share the column count");
  Mat out = factors[0];
  for (std::size_t i = 1; i < factors.size(); ++i) {
    const Mat& b = factors[i];
    Mat next(out.rows() * b.rows(), r);
    for (Index c = 0; c < r; ++c)
      for (Index a = 0; a < out.rows(); ++a)
        next.col(c).segment(a * b.rows(), b.rows()) = out(a, c) * b.col(c);
    out = std::move(next);
  }
  return out;
}

Mat khatri_rao(std::initializer_list<Mat> factors) {
  return khatri_rao(std::span<const Mat>(factors.begin(), factors.size()));
}

Mat kronecker(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j)
    for (Index i = 0; i < a.rows(); ++i)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

const Mat& CpFactors::factor(int mode) const {
  switch (mode) {
    case 1: return U_T;
    case 2: return U_S;
    case 3: return U_H;
    case 4: return U_W;
  }
  throw ValidationError("CpFactors: mode must be in 1..4");
}

Mat& CpFactors::factor(int mode) {
  return const_cast<Mat&>(std::as_const(*this).factor(mode));
}

void CpFactors::validate() const {
  const Index r = U_T.cols();
  require(r >= 1, "CpFactors: rank must be >= 1");
  require(U_S.cols() == r && U_H.cols() == r && U_W.cols() == r,
          "CpFactors: factors must share the column count");
  require(U_T.rows() > 0 && U_S.rows() > 0 && U_H.rows() > 0 && U_W.rows() > 0,
          "CpFactors: empty factor");
}

void Tucker2Factors::validate() const {
  require(G.size() > 0, "Tucker2Factors: empty core");
  require(U_T.cols() == G.dims().T, "Tucker2Factors: core mode-1 size must equal U_T columns");
  require(U_S.cols() == G.dims().S, "Tucker2Factors: core mode-2 size must equal U_S columns");
}

Tensor4 cp_reconstruct(const CpFactors& f) {
  f.validate();
  const Dims4 d = f.dims();
  // K_(1) = U_T * (U_S kr U_H kr U_W)^T
  const Mat z = khatri_rao({f.U_S, f.U_H, f.U_W});
  const Mat k1 = f.U_T * z.transpose();
  return fold_mode(k1, 1, d);
}

Tensor4 mode1_product(const Tensor4& g, const Mat& a) {
  const Dims4 d = g.dims();
  require(a.cols() == d.T, "mode1_product: inner dimension mismatch");
  const Mat r = a * unfold_mode(g, 1);
  return fold_mode(r, 1, {a.rows(), d.S, d.H, d.W});
}

Tensor4 mode2_product(const Tensor4& g, const Mat& a) {
  const Dims4 d = g.dims();
  require(a.cols() == d.S, "mode2_product: inner dimension mismatch");
  const Mat r = a * unfold_mode(g, 2);
  return fold_mode(r, 2, {d.T, a.rows(), d.H, d.W});
}

Tensor4 tucker2_reconstruct(const Tucker2Factors& f) {
  f.validate();
  return mode2_product(mode1_product(f.G, f.U_T), f.U_S);
}

}  // namespace sigmalr
