#include "sigmalr/conv.hpp"

#include "sigmalr/error.hpp"

namespace sigmalr {

Image::Image(Index channels, Index height, Index width) : c_(channels), h_(height), w_(width) {
  require(channels > 0 && height > 0 && width > 0, "Image: dimensions must be positive");
  data_.assign(static_cast<std::size_t>(channels * height * width), 0.0);
}

Image::Image(Index channels, Index height, Index width, std::vector<double> data)
    : Image(channels, height, width) {
  require(static_cast<Index>(data.size()) == channels * height * width, "Image: data length mismatch");
  data_ = std::move(data);
}

Mat Image::as_matrix() const {
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      data_.data(), c_, h_ * w_);
}

Image Image::from_matrix(const Mat& m, Index height, Index width) {
  require(m.cols() == height * width, "Image::from_matrix: column count must equal height*width");
  Image out(m.rows(), height, width);
  for (Index c = 0; c < m.rows(); ++c)
    for (Index j = 0; j < m.cols(); ++j) out.data_[static_cast<std::size_t>(c * m.cols() + j)] = m(c, j);
  return out;
}

Image Image::padded(Index pad_h, Index pad_w) const {
  require(pad_h >= 0 && pad_w >= 0, "Image::padded: padding must be non-negative");
  if (pad_h == 0 && pad_w == 0) return *this;
  Image out(c_, h_ + 2 * pad_h, w_ + 2 * pad_w);
  for (Index c = 0; c < c_; ++c)
    for (Index y = 0; y < h_; ++y)
      for (Index x = 0; x < w_; ++x) out(c, y + pad_h, x + pad_w) = (*this)(c, y, x);
  return out;
}

ConvSpec ConvSpec::same(const Dims4& kernel) {
  require(kernel.H % 2 == 1 && kernel.W % 2 == 1, "ConvSpec::same: kernel sizes must be odd");
  return {(kernel.H - 1) / 2, (kernel.W - 1) / 2};
}

namespace {

void check_fits(const Image& x, Index kh, Index kw, const ConvSpec& spec) {
  require(spec.pad_h >= 0 && spec.pad_w >= 0, "conv: padding must be non-negative");
  require(x.height() + 2 * spec.pad_h >= kh && x.width() + 2 * spec.pad_w >= kw,
          "conv: kernel larger than padded image");
}

// Valid cross-correlation of a padded image with a per-channel-pair kernel.
Image correlate_valid(const Tensor4& k, const Image& xp) {
  const Dims4 d = k.dims();
  require(xp.channels() == d.S, "conv: kernel input channels do not match image channels");
  const Index oh = xp.height() - d.H + 1;
  const Index ow = xp.width() - d.W + 1;
  Image y(d.T, oh, ow);
  for (Index t = 0; t < d.T; ++t)
    for (Index oy = 0; oy < oh; ++oy)
      for (Index ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (Index s = 0; s < d.S; ++s)
          for (Index h = 0; h < d.H; ++h)
            for (Index w = 0; w < d.W; ++w) acc += k(t, s, h, w) * xp(s, oy + h, ox + w);
        y(t, oy, ox) = acc;
      }
  return y;
}

// 1x1 convolution: out[c] = sum_i m(c, i) * in[i].
Image pointwise(const Mat& m, const Image& x) {
  require(m.cols() == x.channels(), "conv: pointwise channel mismatch");
  return Image::from_matrix(m * x.as_matrix(), x.height(), x.width());
}

}  // namespace

Mat im2col(const Image& x, Index kh, Index kw, const ConvSpec& spec) {
  check_fits(x, kh, kw, spec);
  const Image xp = x.padded(spec.pad_h, spec.pad_w);
  const Index oh = xp.height() - kh + 1;
  const Index ow = xp.width() - kw + 1;
  Mat out(x.channels() * kh * kw, oh * ow);
  for (Index s = 0; s < x.channels(); ++s)
    for (Index h = 0; h < kh; ++h)
      for (Index w = 0; w < kw; ++w) {
        const Index row = (s * kh + h) * kw + w;
        for (Index oy = 0; oy < oh; ++oy)
          for (Index ox = 0; ox < ow; ++ox) out(row, oy * ow + ox) = xp(s, oy + h, ox + w);
      }
  return out;
}

Image conv_direct(const Tensor4& k, const Image& x, const ConvSpec& spec) {
  check_fits(x, k.dims().H, k.dims().W, spec);
  return correlate_valid(k, x.padded(spec.pad_h, spec.pad_w));
}

Image conv_im2col(const Tensor4& k, const Image& x, const ConvSpec& spec) {
  const Dims4 d = k.dims();
  require(x.channels() == d.S, "conv: kernel input channels do not match image channels");
  const Mat cols = im2col(x, d.H, d.W, spec);
  const Index oh = spec.out_height(x.height(), d.H);
  const Index ow = spec.out_width(x.width(), d.W);
  return Image::from_matrix(unfold_mode(k, 1) * cols, oh, ow);
}

Image cp_forward(const CpFactors& f, const Image& x, const ConvSpec& spec) {
  f.validate();
  const Dims4 d = f.dims();
  require(x.channels() == d.S, "cp_forward: factor U_S does not match image channels");
  check_fits(x, d.H, d.W, spec);
  const Index r = f.rank();

  const Image z = pointwise(f.U_S.transpose(), x.padded(spec.pad_h, spec.pad_w));

  // Depthwise vertical pass.
  const Index oh = z.height() - d.H + 1;
  Image zh(r, oh, z.width());
  for (Index c = 0; c < r; ++c)
    for (Index y = 0; y < oh; ++y)
      for (Index xx = 0; xx < z.width(); ++xx) {
        double acc = 0.0;
        for (Index h = 0; h < d.H; ++h) acc += f.U_H(h, c) * z(c, y + h, xx);
        zh(c, y, xx) = acc;
      }

  // Depthwise horizontal pass.
  const Index ow = z.width() - d.W + 1;
  Image zw(r, oh, ow);
  for (Index c = 0; c < r; ++c)
    for (Index y = 0; y < oh; ++y)
      for (Index xx = 0; xx < ow; ++xx) {
        double acc = 0.0;
        for (Index w = 0; w < d.W; ++w) acc += f.U_W(w, c) * zh(c, y, xx + w);
        zw(c, y, xx) = acc;
      }

  return pointwise(f.U_T, zw);
}

Image tucker2_forward(const Tucker2Factors& f, const Image& x, const ConvSpec& spec) {
  f.validate();
  const Dims4 d = f.dims();
  require(x.channels() == d.S, "tucker2_forward: factor U_S does not match image channels");
  check_fits(x, d.H, d.W, spec);
  const Image z = pointwise(f.U_S.transpose(), x.padded(spec.pad_h, spec.pad_w));
  const Image core = correlate_valid(f.G, z);
  return pointwise(f.U_T, core);
}

}  // namespace sigmalr
