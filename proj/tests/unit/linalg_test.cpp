#include "sigmalr/error.hpp"
#include "sigmalr/linalg.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

namespace sigmalr {
namespace {

using testing::Rng;

SymSolveConfig no_ridge() {
  SymSolveConfig cfg;
  cfg.epsilon_scale = 0.0;
  return cfg;
}

TEST(SymSqrt, IdentityBothMethods) {
  for (SqrtMethod m : {SqrtMethod::cholesky, SqrtMethod::svd}) {
    const SqrtResult r = sym_sqrt(Mat::Identity(3, 3), no_ridge(), m);
    EXPECT_LT((r.L * r.L.transpose() - Mat::Identity(3, 3)).norm(), 1e-14);
    EXPECT_EQ(r.epsilon, 0.0);
  }
  const SqrtResult c = sym_sqrt(Mat::Identity(3, 3), no_ridge(), SqrtMethod::cholesky);
  EXPECT_TRUE(c.lower_triangular);
  EXPECT_LT((c.L - Mat::Identity(3, 3)).norm(), 1e-14);
}

TEST(SymSqrt, Diagonal) {
  Mat s = Mat::Zero(2, 2);
  s.diagonal() << 4, 9;
  const SqrtResult r = sym_sqrt(s, no_ridge(), SqrtMethod::cholesky);
  EXPECT_NEAR(std::abs(r.L(0, 0)), 2.0, 1e-14);
  EXPECT_NEAR(std::abs(r.L(1, 1)), 3.0, 1e-14);
  EXPECT_NEAR(r.L(1, 0), 0.0, 1e-14);
}

TEST(SymSqrt, RidgeIsRelativeToTrace) {
  Rng rng(10);
  const Mat s = testing::random_spd(5, 50.0, rng);
  SymSolveConfig cfg;
  cfg.epsilon_scale = 1e-3;
  for (SqrtMethod m : {SqrtMethod::cholesky, SqrtMethod::svd}) {
    const SqrtResult r = sym_sqrt(s, cfg, m);
    EXPECT_NEAR(r.epsilon, 1e-3 * s.trace() / 5.0, 1e-15);
    EXPECT_LT((r.L * r.L.transpose() - s - r.epsilon * Mat::Identity(5, 5)).norm(), 1e-12 * s.norm());
  }
}

TEST(SymSqrt, SingularNeedsSvdOrRidge) {
  Mat s = Mat::Zero(3, 3);
  s(0, 0) = 1.0;
  const SqrtResult r = sym_sqrt(s, no_ridge(), SqrtMethod::svd);
  EXPECT_LT((r.L * r.L.transpose() - s).norm(), 1e-14);
  EXPECT_THROW(sym_sqrt(-Mat::Identity(2, 2), no_ridge(), SqrtMethod::cholesky), NumericalError);
  EXPECT_THROW(sym_sqrt(Mat::Zero(2, 3), no_ridge(), SqrtMethod::svd), ValidationError);
}

TEST(Minres, IdentityReturnsRhs) {
  const Vec b = Vec::LinSpaced(6, -1.0, 4.0);
  const MinresResult r = minres_solve([](const Vec& v) { return v; }, b, SymSolveConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - b).norm(), 1e-12);
}

TEST(Minres, Diagonal) {
  Vec d(3);
  d << 1, 2, 4;
  const MinresResult r =
      minres_solve([&](const Vec& v) -> Vec { return d.cwiseProduct(v); }, Vec(d), SymSolveConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT((r.x - Vec::Ones(3)).norm(), 1e-10);
}

TEST(Minres, SymmetricIndefinite) {
  Rng rng(11);
  const Mat q = testing::random_spd(8, 10.0, rng);
  Mat a = q;
  a(0, 0) -= 30.0;  // indefinite but nonsingular with probability one
  a = 0.5 * (a + a.transpose()).eval();
  const Vec b = testing::randn(8, 1, rng);
  const MinresResult r = minres_solve([&](const Vec& v) -> Vec { return a * v; }, b, SymSolveConfig{});
  EXPECT_TRUE(r.converged);
  EXPECT_LT((a * r.x - b).norm() / b.norm(), 1e-9);
}

TEST(Minres, ZeroRhs) {
  const MinresResult r = minres_solve([](const Vec& v) { return v; }, Vec::Zero(4), SymSolveConfig{});
  EXPECT_EQ(r.x.norm(), 0.0);
}

TEST(Pinv, DiagonalWithZero) {
  Mat a = Mat::Zero(2, 2);
  a(0, 0) = 2.0;
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = 0.5;
  EXPECT_LT((pinv(a) - expect).norm(), 1e-15);
}

TEST(Pinv, OrthogonalIsTranspose) {
  Rng rng(12);
  const Mat q = Eigen::HouseholderQR<Mat>(testing::randn(5, 5, rng)).householderQ();
  EXPECT_LT((pinv(q) - q.transpose()).norm(), 1e-13);
}

TEST(Pinv, PenroseConditionsRectangular) {
  Rng rng(13);
  const Mat a = testing::randn(6, 3, rng) * testing::randn(3, 4, rng);  // rank 3
  const Mat p = pinv(a);
  EXPECT_LT((a * p * a - a).norm(), 1e-12 * a.norm());
  EXPECT_LT((p * a * p - p).norm(), 1e-12 * p.norm());
  EXPECT_LT(((a * p).transpose() - a * p).norm(), 1e-12);
  EXPECT_LT(((p * a).transpose() - p * a).norm(), 1e-12);
}

TEST(TruncatedSvd, DiagonalRankOne) {
  Mat a = Mat::Zero(2, 2);
  a.diagonal() << 3, 1;
  const TruncatedSvd t = truncated_svd(a, 1);
  ASSERT_EQ(t.s.size(), 1);
  EXPECT_NEAR(t.s(0), 3.0, 1e-14);
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = 3.0;
  EXPECT_LT((t.reconstruct() - expect).norm(), 1e-14);
}

TEST(TruncatedSvd, ExactRankOne) {
  Rng rng(14);
  const Mat a = testing::randn(5, 1, rng) * testing::randn(1, 7, rng);
  EXPECT_LT((truncated_svd(a, 1).reconstruct() - a).norm(), 1e-12 * a.norm());
}

TEST(TruncatedSvd, SignConventionAndOrder) {
  Rng rng(15);
  const Mat a = testing::randn(6, 4, rng);
  const TruncatedSvd t = truncated_svd(a, 3);
  for (Index i = 1; i < 3; ++i) EXPECT_GE(t.s(i - 1), t.s(i));
  // Deterministic sign: the largest-magnitude entry of each left vector is positive.
  for (Index j = 0; j < 3; ++j) {
    Index arg = 0;
    t.U.col(j).cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(t.U(arg, j), 0.0);
  }
  EXPECT_THROW(truncated_svd(a, 5), ValidationError);
  EXPECT_THROW(truncated_svd(a, 0), ValidationError);
}

TEST(SolveGram, IdentityReturnsRhs) {
  const Vec rhs = Vec::LinSpaced(5, 1.0, 5.0);
  EXPECT_LT((solve_gram(Mat::Identity(5, 5), rhs, SymSolveConfig{}) - rhs).norm(), 1e-12);
}

TEST(SolveGram, SingularGramGivesMinimumNormSolution) {
  Rng rng(16);
  const Mat p = testing::randn(10, 3, rng) * testing::randn(3, 6, rng);
  const Vec b = testing::randn(10, 1, rng);
  GramSolveInfo info;
  const Vec x = solve_gram(p.transpose() * p, p.transpose() * b, SymSolveConfig{}, &info);
  EXPECT_LT((x - testing::lstsq_oracle(p, b)).norm(), 1e-7 * x.norm());
}

TEST(SolveGramRows, MatchesDenseSolve) {
  Rng rng(17);
  const Mat g = testing::random_spd(4, 20.0, rng);
  const Mat rhs = testing::randn(3, 4, rng);
  const Mat x = solve_gram_rows(g, rhs, SymSolveConfig{});
  EXPECT_LT((x * g - rhs).norm(), 1e-9 * rhs.norm());
}

TEST(SymSolveConfig, RejectsBadValues) {
  SymSolveConfig cfg;
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = {};
  cfg.epsilon_scale = -1.0;
  EXPECT_THROW(cfg.validate(), ValidationError);
}

}  // namespace
}  // namespace sigmalr
