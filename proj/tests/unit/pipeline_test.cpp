#include "sigmalr/error.hpp"
#include "sigmalr/manifest.hpp"
#include "sigmalr/npy.hpp"
#include "sigmalr/pipeline.hpp"
#include "sigmalr/rank_select.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

namespace sigmalr {
namespace {

using testing::Rng;
namespace fs = std::filesystem;

LayerEntry conv_layer(const std::string& name, const Dims4& d) {
  LayerEntry l;
  l.name = name;
  l.kind = LayerKind::conv;
  l.kernel_file = name + ".npy";
  l.dims = {d.T, d.S, d.H, d.W};
  return l;
}

ModelManifest save_manifest(const testing::TempDir& dir, ModelManifest m) {
  m.save(dir / "model.json");
  return ModelManifest::load(dir / "model.json");
}

CompressConfig config(const testing::TempDir& dir, CompressMethod method, NormKind norm, double alpha) {
  CompressConfig cfg;
  cfg.method = method;
  cfg.norm = norm;
  cfg.alpha = alpha;
  cfg.sweeps = 500;
  cfg.tol = 1e-13;
  cfg.out_dir = dir / "out";
  cfg.report_path = dir / "out" / "report.json";
  cfg.include_timing = false;
  return cfg;
}

TEST(Pipeline, ExactCpLayer) {
  Rng rng(90);
  testing::TempDir dir("pipe");
  const Dims4 d{8, 6, 5, 5};
  write_tensor(dir / "c.npy", cp_reconstruct(testing::random_cp(d, 2, rng)));
  ModelManifest m;
  m.model = "exact";
  m.layers = {conv_layer("c", d)};
  m = save_manifest(dir, m);

  const CompressionReport r = compress_model(m, config(dir, CompressMethod::cp, NormKind::frobenius, 1.0));
  ASSERT_EQ(r.layers.size(), 1u);
  const LayerReport& l = r.layers[0];
  EXPECT_EQ(l.ranks, (std::vector<Index>{2}));
  EXPECT_LT(*l.rel_error_frobenius, 1e-8);
  EXPECT_EQ(l.compressed_params, 2 * (8 + 6 + 5 + 5));
  EXPECT_EQ(l.original_params, 8 * 6 * 5 * 5);
  for (const char* role : {"U_T", "U_S", "U_H", "U_W"}) {
    EXPECT_EQ(l.factor_files.at(role), std::string("c.") + role + ".npy");
    EXPECT_TRUE(fs::exists(dir / "out" / l.factor_files.at(role)));
  }
  EXPECT_EQ(r.status, "ok");
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));

  // Sigma = Id gives the same errors.
  Mat id = Mat::Identity(150, 150);
  write_tensor(dir / "c.sigma.npy", id);
  m.layers[0].sigma_file = "c.sigma.npy";
  m = save_manifest(dir, m);
  const CompressionReport s = compress_model(m, config(dir, CompressMethod::cp, NormKind::sigma, 1.0));
  EXPECT_NEAR(*s.layers[0].rel_error_frobenius, *l.rel_error_frobenius, 1e-6);
  EXPECT_NEAR(*s.layers[0].rel_error_sigma, *l.rel_error_frobenius, 1e-6);
}

TEST(Pipeline, Tucker2RatioMatchesHandCount) {
  Rng rng(91);
  testing::TempDir dir("pipe");
  const Dims4 d1{12, 8, 3, 3};
  const Dims4 d2{10, 12, 3, 3};
  const Tensor4 k1 = testing::random_tensor(d1, rng);
  const Tensor4 k2 = tucker2_reconstruct(testing::random_tucker2(d2, 3, 4, rng)) +
                     1e-2 * testing::random_tensor(d2, rng);
  write_tensor(dir / "a.npy", k1);
  write_tensor(dir / "b.npy", k2);
  ModelManifest m;
  m.layers = {conv_layer("a", d1), conv_layer("b", d2)};
  m = save_manifest(dir, m);

  const double alpha = 0.8;
  const CompressionReport r = compress_model(m, config(dir, CompressMethod::tucker2, NormKind::frobenius, alpha));
  Index orig = 0, comp = 0;
  const std::vector<std::pair<Tensor4, Dims4>> ks{{k1, d1}, {k2, d2}};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& [k, d] = ks[i];
    const auto rank = [&](int mode, Index rmax) {
      const double rv = static_cast<double>(vbmf_rank(unfold_mode(k, mode)));
      return std::max<Index>(1, std::lround(rv + (1 - alpha) * (static_cast<double>(rmax) - rv)));
    };
    const Index rt = rank(1, d.T);
    const Index rs = rank(2, d.S);
    EXPECT_EQ(r.layers[i].ranks, (std::vector<Index>{rt, rs}));
    orig += d.size();
    comp += d.T * rt + d.S * rs + rt * rs * d.H * d.W;
  }
  EXPECT_EQ(r.original_params, orig);
  EXPECT_EQ(r.compressed_params, comp);
  EXPECT_EQ(r.compression_ratio, static_cast<double>(orig) / static_cast<double>(comp));
}

TEST(Pipeline, SkippedAndLinearLayers) {
  Rng rng(92);
  testing::TempDir dir("pipe");
  const Dims4 d0{4, 3, 3, 3};
  write_tensor(dir / "first.npy", testing::random_tensor(d0, rng));
  write_tensor(dir / "fc.npy", Mat(testing::randn(6, 9, rng)));
  ModelManifest m;
  m.layers = {conv_layer("first", d0)};
  m.layers[0].skip = true;
  LayerEntry fc;
  fc.name = "fc";
  fc.kind = LayerKind::linear;
  fc.kernel_file = "fc.npy";
  fc.dims = {6, 9};
  fc.ranks = std::vector<Index>{2};
  m.layers.push_back(fc);
  m = save_manifest(dir, m);

  const CompressionReport r = compress_model(m, config(dir, CompressMethod::cp, NormKind::frobenius, 1.0));
  ASSERT_EQ(r.layers.size(), 2u);
  EXPECT_TRUE(r.layers[0].skipped);
  EXPECT_EQ(r.layers[0].compressed_params, d0.size());
  EXPECT_EQ(testing::read_file(dir / "out" / "first.K.npy"), testing::read_file(dir / "first.npy"));
  EXPECT_EQ(r.layers[1].method, "svd");
  EXPECT_TRUE(r.layers[1].ranks_from_manifest);
  EXPECT_EQ(r.layers[1].compressed_params, 2 * (6 + 9));
  EXPECT_EQ(r.original_params, d0.size() + 54);
  EXPECT_EQ(r.compressed_params, d0.size() + 30);
}

TEST(Pipeline, FailedLayerLeavesPartialReport) {
  Rng rng(93);
  testing::TempDir dir("pipe");
  const Dims4 d{4, 3, 3, 3};
  write_tensor(dir / "good.npy", testing::random_tensor(d, rng));
  write_tensor(dir / "bad.npy", Tensor4::zeros(d));
  ModelManifest m;
  m.layers = {conv_layer("good", d), conv_layer("bad", d)};
  m = save_manifest(dir, m);
  const CompressConfig cfg = config(dir, CompressMethod::tucker2, NormKind::frobenius, 1.0);
  try {
    compress_model(m, cfg);
    FAIL() << "zero kernel accepted";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'bad'"), std::string::npos) << e.what();
  }
  const CompressionReport r = CompressionReport::load(*cfg.report_path);
  EXPECT_EQ(r.status, "failed");
  ASSERT_TRUE(r.error.has_value());
  ASSERT_EQ(r.layers.size(), 1u);
  EXPECT_EQ(r.layers[0].name, "good");
}

TEST(Pipeline, ConfigurationErrorsAreCaughtUpFront) {
  Rng rng(94);
  testing::TempDir dir("pipe");
  const Dims4 d{4, 3, 3, 3};
  write_tensor(dir / "c.npy", testing::random_tensor(d, rng));
  ModelManifest m;
  m.layers = {conv_layer("c", d)};
  m = save_manifest(dir, m);
  EXPECT_THROW(compress_model(m, config(dir, CompressMethod::cp, NormKind::sigma, 1.0)), ValidationError);
  EXPECT_THROW(compress_model(m, config(dir, CompressMethod::wals, NormKind::frobenius, 1.0)), ValidationError);
  EXPECT_THROW(compress_model(m, config(dir, CompressMethod::wals, NormKind::sigma, 1.0)), ValidationError);
  m.layers[0].ranks = std::vector<Index>{1000};
  EXPECT_THROW(compress_model(m, config(dir, CompressMethod::cp, NormKind::frobenius, 1.0)), ValidationError);
  m.layers[0].ranks.reset();
  m.layers[0].dims = {4, 3, 3, 2};
  EXPECT_THROW(compress_model(m, config(dir, CompressMethod::cp, NormKind::frobenius, 1.0)), ValidationError);
}

TEST(Pipeline, VerifyDetectsTampering) {
  Rng rng(95);
  testing::TempDir dir("pipe");
  const Dims4 d{6, 4, 3, 3};
  write_tensor(dir / "c.npy", testing::random_tensor(d, rng));
  write_tensor(dir / "c.patches.npy", Mat(testing::randn(36, 80, rng)));
  ModelManifest m;
  m.layers = {conv_layer("c", d)};
  m.layers[0].patches_file = "c.patches.npy";
  m = save_manifest(dir, m);
  const CompressConfig cfg = config(dir, CompressMethod::tucker2, NormKind::sigma, 0.5);
  const CompressionReport r = compress_model(m, cfg);
  EXPECT_TRUE(r.layers[0].functional_error.has_value());
  EXPECT_TRUE(verify_report(r).ok);

  CompressionReport edited = r;
  *edited.layers[0].rel_error_sigma *= 1.0 + 1e-6;
  EXPECT_FALSE(verify_report(edited).ok);

  edited = r;
  edited.compressed_params += 1;
  EXPECT_FALSE(verify_report(edited).ok);

  const fs::path g = dir / "out" / "c.G.npy";
  Tensor4 core = read_tensor4(g);
  core(0, 0, 0, 0) += 1e-3;
  write_tensor(g, core);
  const VerifyResult v = verify_report(r);
  EXPECT_FALSE(v.ok);
  EXPECT_FALSE(v.problems.empty());
}

TEST(Pipeline, ReportJsonRoundTrip) {
  Rng rng(96);
  testing::TempDir dir("pipe");
  const Dims4 d{5, 3, 3, 3};
  write_tensor(dir / "c.npy", testing::random_tensor(d, rng));
  ModelManifest m;
  m.model = "rt";
  m.layers = {conv_layer("c", d)};
  m = save_manifest(dir, m);
  const CompressionReport r = compress_model(m, config(dir, CompressMethod::svd, NormKind::frobenius, 0.3));
  const CompressionReport back = CompressionReport::from_json(nlohmann::json::parse(r.dump(false)));
  EXPECT_EQ(back.dump(false), r.dump(false));
  EXPECT_EQ(back.schema, std::string(kReportSchema));
  EXPECT_FALSE(nlohmann::json::parse(r.dump(false)).contains("timing"));
  EXPECT_TRUE(nlohmann::json::parse(r.dump(true)).contains("timing"));
}

TEST(FunctionalError, HandCases) {
  Rng rng(97);
  const Mat a = testing::randn(3, 4, rng);
  EXPECT_EQ(evaluate_functional_error(a, a, testing::randn(4, 10, rng)), 0.0);
  Mat at = a;
  at(0, 0) += 2.0;
  at(2, 0) -= 1.0;
  at(1, 3) += 7.0;  // invisible to e_1
  EXPECT_NEAR(evaluate_functional_error(a, at, Mat::Identity(4, 1)), std::sqrt(5.0), 1e-14);
}

TEST(FunctionalError, MatchesSigmaNorm) {
  Rng rng(98);
  const Dims4 d{4, 2, 3, 3};
  const Tensor4 k = testing::random_tensor(d, rng);
  const Tensor4 kt = testing::random_tensor(d, rng);
  const Mat patches = testing::randn(18, 200, rng);
  SigmaAccumulator acc(18);
  acc.add(patches);
  SymSolveConfig cfg;
  cfg.epsilon_scale = 0.0;
  const SigmaRoot root = SigmaRoot::from_sigma(acc.finalize(), cfg);
  const double f = evaluate_functional_error(k, kt, patches);
  EXPECT_NEAR(f, sigma_norm(k, kt, root), 1e-6 * f);
}

TEST(Manifest, Validation) {
  ModelManifest m;
  EXPECT_THROW(m.validate(), ValidationError);
  m.layers = {conv_layer("a", {2, 2, 1, 1}), conv_layer("a", {2, 2, 1, 1})};
  EXPECT_THROW(m.validate(), ValidationError);
  m.layers = {conv_layer("x/y", {2, 2, 1, 1})};
  EXPECT_THROW(m.validate(), ValidationError);
  m.layers = {conv_layer("a", {2, 2, 1, 1})};
  m.layers[0].dims = {2, 2};
  EXPECT_THROW(m.validate(), ValidationError);
  m.layers[0].dims = {2, 0, 1, 1};
  EXPECT_THROW(m.validate(), ValidationError);
  EXPECT_THROW(parse_layer_kind("pool"), ValidationError);
  EXPECT_THROW(ModelManifest::from_json(nlohmann::json::parse(R"({"layers": [{"name": "a"}]})"), "."),
               ValidationError);
}

TEST(Manifest, RelativePathsResolveAgainstManifest) {
  testing::TempDir dir("pipe");
  ModelManifest m;
  m.layers = {conv_layer("a", {2, 2, 1, 1})};
  m = save_manifest(dir, m);
  EXPECT_EQ(m.resolve("a.npy"), fs::absolute(dir.path()) / "a.npy");
  EXPECT_EQ(m.resolve("/abs/a.npy"), fs::path("/abs/a.npy"));
  EXPECT_EQ(m.to_json(), ModelManifest::from_json(m.to_json(), m.base_dir).to_json());
}

TEST(CompressConfig, EffectiveJobsHonoursEnvironment) {
  ::setenv("SIGMA_LOWRANK_THREADS", "3", 1);
  EXPECT_EQ(effective_jobs(1), 3);
  ::unsetenv("SIGMA_LOWRANK_THREADS");
  EXPECT_EQ(effective_jobs(2), 2);
}

}  // namespace
}  // namespace sigmalr
