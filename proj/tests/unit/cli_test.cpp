#include "sigmalr/decomp.hpp"
#include "sigmalr/manifest.hpp"
#include "sigmalr/npy.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>

namespace sigmalr {
namespace {

using testing::Rng;
using testing::run;

// Writes a one-layer conv model into `dir` and returns the manifest path.
std::string tiny_model(const testing::TempDir& dir, bool with_patches) {
  Rng rng(100);
  const Dims4 d{6, 4, 3, 3};
  write_tensor(dir / "c.npy", testing::random_tensor(d, rng));
  nlohmann::json layer{{"name", "c"}, {"kind", "conv"}, {"kernel_file", "c.npy"}, {"dims", {6, 4, 3, 3}}};
  if (with_patches) {
    write_tensor(dir / "c.patches.npy", Mat(testing::randn(36, 60, rng)));
    layer["patches_file"] = "c.patches.npy";
  }
  const nlohmann::json m{{"model", "tiny"}, {"layers", {layer}}};
  std::ofstream(dir / "model.json") << m.dump(2);
  return (dir / "model.json").string();
}

TEST(Cli, PlanRanksOnPlantedTucker2) {
  Rng rng(101);
  testing::TempDir dir("cli");
  Tensor4 k = tucker2_reconstruct(testing::random_tucker2({16, 12, 3, 3}, 4, 3, rng));
  Tensor4 noise = testing::random_tensor(k.dims(), rng);
  noise *= 1e-3 * k.frobenius_norm() / std::sqrt(static_cast<double>(k.size()));
  k += noise;
  write_tensor(dir / "k.npy", k);
  const auto r = run({"plan-ranks", "--kernel", (dir / "k.npy").string(), "--method", "tucker2", "--alpha", "1"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "{\"R_T\":4,\"R_S\":3}\n");
}

TEST(Cli, SigmaNormWithoutInputsIsRejected) {
  testing::TempDir dir("cli");
  const std::string manifest = tiny_model(dir, false);
  const auto r = run({"compress", "--manifest", manifest, "--norm", "sigma", "--out", (dir / "out").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("patches_file or sigma_file"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("estimate-sigma"), std::string::npos) << r.err;
}

TEST(Cli, CompressThenVerify) {
  testing::TempDir dir("cli");
  const std::string manifest = tiny_model(dir, true);
  const std::string out = (dir / "out").string();
  const auto c = run({"compress", "--manifest", manifest, "--method", "tucker2", "--norm", "sigma", "--alpha",
                      "0.5", "--out", out});
  ASSERT_EQ(c.code, 0) << c.err;
  const auto v = run({"verify", "--report", (dir / "out" / "report.json").string()});
  EXPECT_EQ(v.code, 0) << v.err;
  EXPECT_NE(v.out.find("verified 1 layers"), std::string::npos);

  // Tampered factor file: verification fails with a numerical exit code.
  Tensor4 g = read_tensor4(dir / "out" / "c.G.npy");
  g(0, 0, 0, 0) *= 2.0;
  write_tensor(dir / "out" / "c.G.npy", g);
  EXPECT_EQ(run({"verify", "--report", (dir / "out" / "report.json").string()}).code, 3);
}

TEST(Cli, EstimateSigma) {
  Rng rng(102);
  testing::TempDir dir("cli");
  const Mat a = testing::randn(5, 7, rng);
  const Mat b = testing::randn(5, 3, rng);
  write_tensor(dir / "a.npy", a);
  write_tensor(dir / "b.npy", b);
  const auto r = run({"estimate-sigma", "--patches", (dir / "a.npy").string(), (dir / "b.npy").string(), "--out",
                      (dir / "s.npy").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Mat s = read_matrix(dir / "s.npy");
  EXPECT_LT((s - (a * a.transpose() + b * b.transpose()) / 10.0).norm(), 1e-12);
}

TEST(Cli, UsageErrors) {
  testing::TempDir dir("cli");
  const std::string manifest = tiny_model(dir, true);
  EXPECT_EQ(run({"compress", "--manifest", manifest, "--bogus"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"compress", "--manifest", manifest, "--method", "qr"}).code, 2);
  EXPECT_EQ(run({"compress", "--manifest", (dir / "missing.json").string()}).code, 2);
  const auto w = run({"compress", "--manifest", manifest, "--method", "wals", "--norm", "sigma"});
  EXPECT_EQ(w.code, 2);
  EXPECT_NE(w.err.find("conflicting"), std::string::npos) << w.err;
  EXPECT_EQ(run({"--help"}).code, 0);
}

}  // namespace
}  // namespace sigmalr
