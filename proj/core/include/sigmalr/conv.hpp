#pragma once

// Reference stride-1 2-D convolution (cross-correlation, as in deep-learning
// frameworks) in three forms: direct loops, im2col matrix product, and the
// factorised CP / Tucker2 layer sequences.

#include "sigmalr/tensor.hpp"

#include <vector>

namespace sigmalr {

class Image {
public:
  Image() = default;
  Image(Index channels, Index height, Index width);
  Image(Index channels, Index height, Index width, std::vector<double> data);

  Index channels() const { return c_; }
  Index height() const { return h_; }
  Index width() const { return w_; }

  double& operator()(Index c, Index y, Index x) { return data_[static_cast<std::size_t>((c * h_ + y) * w_ + x)]; }
  double operator()(Index c, Index y, Index x) const { return data_[static_cast<std::size_t>((c * h_ + y) * w_ + x)]; }

  const std::vector<double>& data() const { return data_; }
  Eigen::Map<const Vec> flat() const { return {data_.data(), static_cast<Index>(data_.size())}; }

  /// channels x (height*width), row-major spatial flattening.
  Mat as_matrix() const;
  static Image from_matrix(const Mat& m, Index height, Index width);

  Image padded(Index pad_h, Index pad_w) const;

private:
  Index c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

struct ConvSpec {
  Index pad_h = 0;
  Index pad_w = 0;

  static ConvSpec same(const Dims4& kernel);  // (H-1)/2, (W-1)/2; requires odd sizes

  Index out_height(Index in_h, Index kh) const { return in_h - kh + 1 + 2 * pad_h; }
  Index out_width(Index in_w, Index kw) const { return in_w - kw + 1 + 2 * pad_w; }
};

/// (S*H*W) x (H_y' * W_x') patch matrix, rows ordered (s,h,w) with w fastest.
Mat im2col(const Image& x, Index kh, Index kw, const ConvSpec& spec = {});

Image conv_direct(const Tensor4& k, const Image& x, const ConvSpec& spec = {});

/// unfold_mode(K,1) * im2col(x), folded back into an image.
Image conv_im2col(const Tensor4& k, const Image& x, const ConvSpec& spec = {});

/// 1x1 (U_S), depthwise Hx1 (U_H), depthwise 1xW (U_W), 1x1 (U_T).
Image cp_forward(const CpFactors& f, const Image& x, const ConvSpec& spec = {});

/// 1x1 (U_S), full HxW conv with the core, 1x1 (U_T).
Image tucker2_forward(const Tucker2Factors& f, const Image& x, const ConvSpec& spec = {});

}  // namespace sigmalr
