#include "sigmalr/conv.hpp"
#include "sigmalr/covariance.hpp"
#include "sigmalr/error.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace sigmalr {
namespace {

using testing::Rng;

TEST(SigmaAccumulator, SingleUnitPatch) {
  SigmaAccumulator acc(3);
  acc.add(Mat::Identity(3, 1));
  EXPECT_EQ(acc.count(), 1);
  Mat expect = Mat::Zero(3, 3);
  expect(0, 0) = 1.0;
  EXPECT_EQ(acc.finalize(Normalization::mean), expect);
}

TEST(SigmaAccumulator, IdentityColumns) {
  SigmaAccumulator acc(4);
  acc.add(Mat::Identity(4, 4));
  EXPECT_LT((acc.finalize(Normalization::mean) - Mat::Identity(4, 4) / 4.0).norm(), 1e-15);
  EXPECT_EQ(acc.finalize(Normalization::sum), Mat::Identity(4, 4));
}

TEST(SigmaAccumulator, MergeEqualsSinglePass) {
  Rng rng(30);
  const Mat a = testing::randn(5, 17, rng);
  const Mat b = testing::randn(5, 9, rng);
  SigmaAccumulator one(5), left(5), right(5);
  Mat ab(5, 26);
  ab << a, b;
  one.add(ab);
  left.add(a);
  right.add(b);
  left.merge(right);
  EXPECT_EQ(left.count(), 26);
  EXPECT_LT((left.finalize() - one.finalize()).norm(), 1e-13);
  EXPECT_LT((one.finalize() - ab * ab.transpose() / 26.0).norm(), 1e-13);
  SigmaAccumulator other(4);
  EXPECT_THROW(left.merge(other), ValidationError);
  EXPECT_THROW(left.add(Mat::Zero(4, 1)), ValidationError);
}

TEST(SigmaAccumulator, EstimateFromBatches) {
  Rng rng(31);
  const std::vector<Mat> batches{testing::randn(3, 4, rng), testing::randn(3, 6, rng)};
  const SigmaAccumulator acc = estimate_sigma(batches);
  EXPECT_EQ(acc.count(), 10);
  Mat all(3, 10);
  all << batches[0], batches[1];
  EXPECT_LT((acc.finalize() - all * all.transpose() / 10.0).norm(), 1e-13);
}

TEST(SigmaAccumulator, EmptyFinalizeRejected) {
  SigmaAccumulator acc(2);
  EXPECT_THROW(acc.finalize(), ValidationError);
}

TEST(SigmaNorm, ZeroForEqualKernels) {
  Rng rng(32);
  const Tensor4 k = testing::random_tensor({3, 2, 2, 2}, rng);
  SymSolveConfig cfg;
  const SigmaRoot root = SigmaRoot::from_sigma(testing::random_spd(8, 10.0, rng), cfg);
  EXPECT_EQ(sigma_norm(k, k, root), 0.0);
}

TEST(SigmaNorm, IdentityIsFrobenius) {
  Rng rng(33);
  const Tensor4 k = testing::random_tensor({3, 2, 2, 2}, rng);
  const Tensor4 kt = testing::random_tensor({3, 2, 2, 2}, rng);
  EXPECT_NEAR(sigma_norm(k, kt, SigmaRoot::identity(8)), (k - kt).frobenius_norm(), 1e-13);
}

TEST(SigmaNorm, IndependentOfRootChoice) {
  // Cholesky and symmetric roots of the same Sigma define the same norm.
  Rng rng(34);
  const Tensor4 k = testing::random_tensor({4, 3, 2, 2}, rng);
  const Mat sigma = testing::random_spd(12, 100.0, rng);
  SymSolveConfig cfg;
  const SigmaRoot a = SigmaRoot::from_sigma(sigma, cfg, SqrtMethod::cholesky);
  const SigmaRoot b = SigmaRoot::from_sigma(sigma, cfg, SqrtMethod::svd);
  EXPECT_NEAR(sigma_norm(k, a), sigma_norm(k, b), 1e-12 * sigma_norm(k, a));
  // Trace form: ||K||_Sigma^2 = tr(K_(1) Sigma_reg K_(1)^T).
  const Mat k1 = unfold_mode(k, 1);
  const Mat reg = sigma + a.epsilon * Mat::Identity(12, 12);
  EXPECT_NEAR(std::pow(sigma_norm(k, a), 2), (k1 * reg * k1.transpose()).trace(), 1e-10);
}

TEST(SigmaNorm, ExpectedOutputError) {
  // With Sigma the empirical second moment of the patches, the norm is the
  // root-mean-square output error of the convolution.
  Rng rng(35);
  const Dims4 d{3, 2, 3, 3};
  const Tensor4 k = testing::random_tensor(d, rng);
  const Tensor4 kt = testing::random_tensor(d, rng);
  const Image x = testing::random_image(2, 8, 9, rng);
  const Mat patches = im2col(x, 3, 3);
  SigmaAccumulator acc(18);
  acc.add(patches);
  SymSolveConfig cfg;
  cfg.epsilon_scale = 0.0;
  const SigmaRoot root = SigmaRoot::from_sigma(acc.finalize(), cfg);
  const Mat out = unfold_mode(k - kt, 1) * patches;
  const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(patches.cols()));
  EXPECT_NEAR(sigma_norm(k, kt, root), rms, 1e-10 * rms);
}

TEST(RelativeError, Endpoints) {
  Rng rng(36);
  const Tensor4 k = testing::random_tensor({2, 2, 2, 2}, rng);
  EXPECT_EQ(relative_recon_error(k, k), 0.0);
  EXPECT_NEAR(relative_recon_error(k, Tensor4::zeros(k.dims())), 1.0, 1e-15);
  SymSolveConfig cfg;
  const SigmaRoot root = SigmaRoot::from_sigma(testing::random_spd(8, 5.0, rng), cfg);
  EXPECT_NEAR(relative_recon_error(k, Tensor4::zeros(k.dims()), &root), 1.0, 1e-15);
}

}  // namespace
}  // namespace sigmalr
