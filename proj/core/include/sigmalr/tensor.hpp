#pragma once

// Dense 4-way kernel tensors and the unfolding / Kronecker / Khatri-Rao
// algebra used by every decomposition.
//
// Linearisation: K[t,s,h,w] lives at ((t*S + s)*H + h)*W + w, i.e. w is the
// fastest index. Mode-n unfoldings keep the remaining modes in their natural
// order with the last one fastest, so the mode-1 unfolding has its columns
// ordered (s,h,w) exactly like an im2col patch.

#include <Eigen/Dense>

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sigmalr {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

struct Dims4 {
  Index T = 0;
  Index S = 0;
  Index H = 0;
  Index W = 0;

  Index size() const { return T * S * H * W; }
  Index operator[](int mode) const;  // 0-based: 0=T, 1=S, 2=H, 3=W
  std::array<Index, 4> as_array() const { return {T, S, H, W}; }
  bool operator==(const Dims4&) const = default;
  std::string str() const;
};

class Tensor4 {
public:
  Tensor4() = default;
  explicit Tensor4(Dims4 dims);
  Tensor4(Dims4 dims, std::vector<double> data);

  static Tensor4 zeros(Dims4 dims) { return Tensor4(dims); }

  const Dims4& dims() const { return dims_; }
  Index size() const { return static_cast<Index>(data_.size()); }

  double& operator()(Index t, Index s, Index h, Index w) {
    return data_[static_cast<std::size_t>(offset(t, s, h, w))];
  }
  double operator()(Index t, Index s, Index h, Index w) const {
    return data_[static_cast<std::size_t>(offset(t, s, h, w))];
  }

  Index offset(Index t, Index s, Index h, Index w) const {
    return ((t * dims_.S + s) * dims_.H + h) * dims_.W + w;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  Eigen::Map<Vec> flat() { return {data_.data(), size()}; }
  Eigen::Map<const Vec> flat() const { return {data_.data(), size()}; }

  double frobenius_norm() const { return flat().norm(); }

  Tensor4& operator+=(const Tensor4& other);
  Tensor4& operator-=(const Tensor4& other);
  Tensor4& operator*=(double c);

private:
  Dims4 dims_{};
  std::vector<double> data_;
};

Tensor4 operator+(Tensor4 a, const Tensor4& b);
Tensor4 operator-(Tensor4 a, const Tensor4& b);
Tensor4 operator*(double c, Tensor4 a);

/// Elementwise (Hadamard) product.
Tensor4 hadamard(const Tensor4& a, const Tensor4& b);

/// Mode-n unfolding, `mode` in 1..4.
Mat unfold_mode(const Tensor4& k, int mode);

/// Inverse of unfold_mode.
Tensor4 fold_mode(const Mat& m, int mode, Dims4 dims);

/// Column-wise Kronecker product. Row index of the result runs with the last
/// factor fastest, matching unfold_mode's column ordering.
Mat khatri_rao(std::span<const Mat> factors);
Mat khatri_rao(std::initializer_list<Mat> factors);

Mat kronecker(const Mat& a, const Mat& b);

/// Column-major vectorisation; Vec(A)[i + rows*j] = A(i,j).
inline Vec vec(const Mat& a) { return Eigen::Map<const Vec>(a.data(), a.size()); }

struct CpFactors {
  Mat U_T;  // T x R
  Mat U_S;  // S x R
  Mat U_H;  // H x R
  Mat U_W;  // W x R

  Index rank() const { return U_T.cols(); }
  Dims4 dims() const { return {U_T.rows(), U_S.rows(), U_H.rows(), U_W.rows()}; }
  const Mat& factor(int mode) const;  // 1-based
  Mat& factor(int mode);
  void validate() const;
  Index parameter_count() const { return rank() * (U_T.rows() + U_S.rows() + U_H.rows() + U_W.rows()); }
};

struct Tucker2Factors {
  Tensor4 G;  // R_T x R_S x H x W
  Mat U_T;    // T x R_T
  Mat U_S;    // S x R_S

  Dims4 dims() const { return {U_T.rows(), U_S.rows(), G.dims().H, G.dims().W}; }
  void validate() const;
  Index parameter_count() const {
    return U_T.size() + U_S.size() + G.size();
  }
};

Tensor4 cp_reconstruct(const CpFactors& f);
Tensor4 tucker2_reconstruct(const Tucker2Factors& f);

/// G x_1 A, i.e. contract mode 1 of `g` with the columns of `a`
/// (result mode-1 size = a.rows()).
Tensor4 mode1_product(const Tensor4& g, const Mat& a);
/// G x_2 A.
Tensor4 mode2_product(const Tensor4& g, const Mat& a);

}  // namespace sigmalr
