#include "cli.hpp"

#include "sigmalr/error.hpp"
#include "sigmalr/npy.hpp"
#include "sigmalr/pipeline.hpp"
#include "sigmalr/rank_select.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <ostream>

namespace sigmalr {

namespace {

namespace fs = std::filesystem;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

struct CompressArgs {
  std::string manifest;
  std::string method = "cp";
  std::string norm = "frobenius";
  std::string normalization = "mean";
  double alpha = 1.0;
  double epsilon = 1e-6;
  int sweeps = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string report;
  int jobs = 1;
  bool omit_timing = false;
};

int cmd_compress(const CompressArgs& a, std::ostream& out) {
  CompressConfig cfg;
  cfg.method = parse_compress_method(a.method);
  cfg.norm = parse_norm_kind(a.norm);
  cfg.normalization = a.normalization == "sum" ? Normalization::sum : Normalization::mean;
  cfg.alpha = a.alpha;
  cfg.epsilon = a.epsilon;
  cfg.sweeps = a.sweeps;
  cfg.tol = a.tol;
  cfg.seed = a.seed;
  cfg.out_dir = a.out;
  cfg.report_path = a.report.empty() ? fs::path(a.out) / "report.json" : fs::path(a.report);
  cfg.jobs = a.jobs;
  cfg.include_timing = !a.omit_timing;

  const ModelManifest manifest = ModelManifest::load(a.manifest);
  const CompressionReport report = compress_model(manifest, cfg);
  out << "compressed " << report.layers.size() << " layers, compression ratio " << report.compression_ratio
      << ", report " << cfg.report_path->string() << "\n";
  return 0;
}

int cmd_estimate_sigma(const std::vector<std::string>& patches, const std::string& dest,
                       const std::string& normalization, std::ostream& out) {
  std::vector<fs::path> files(patches.begin(), patches.end());
  const Mat sigma =
      estimate_sigma_from_files(files, normalization == "sum" ? Normalization::sum : Normalization::mean);
  write_tensor(dest, sigma);
  out << "wrote " << sigma.rows() << "x" << sigma.cols() << " Sigma to " << dest << "\n";
  return 0;
}

int cmd_plan_ranks(const std::string& kernel, const std::string& method, double alpha, bool verbose,
                   std::ostream& out) {
  const PlanMethod m = parse_plan_method(method);
  const TensorValue k = read_tensor(kernel);
  RankPlan plan;
  if (const auto* t = std::get_if<Tensor4>(&k)) {
    plan = plan_ranks(*t, m, alpha);
  } else {
    require(m == PlanMethod::svd, "plan-ranks: a 2-D kernel only supports --method svd");
    plan = plan_ranks(std::get<Mat>(k), alpha);
  }
  nlohmann::ordered_json j;
  if (m == PlanMethod::tucker2) {
    j["R_T"] = plan.ranks[0];
    j["R_S"] = plan.ranks[1];
  } else {
    j["R"] = plan.ranks[0];
  }
  if (verbose) {
    j["r_vbmf"] = plan.r_vbmf;
    j["r_max"] = plan.r_max;
    j["alpha"] = plan.alpha;
  }
  out << j.dump() << "\n";
  return 0;
}

int cmd_verify(const std::string& report_path, const std::string& out_dir, double tol, std::ostream& out,
               std::ostream& err) {
  const CompressionReport report = CompressionReport::load(report_path);
  const VerifyResult v =
      verify_report(report, out_dir.empty() ? std::nullopt : std::optional<fs::path>(out_dir), tol);
  if (report.status != "ok") {
    err << "report status is '" << report.status << "'" << (report.error ? ": " + *report.error : "") << "\n";
    return kExitNumerical;
  }
  for (const auto& p : v.problems) err << p << "\n";
  if (!v.ok) return kExitNumerical;
  out << "verified " << report.layers.size() << " layers\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distribution-aware low-rank compression of conv and linear layers", "sigma-lowrank"};
  app.require_subcommand(1);

  CompressArgs ca;
  auto* compress = app.add_subcommand("compress", "Compress every layer listed in a manifest");
  compress->add_option("--manifest", ca.manifest, "Model manifest JSON")->required()->check(CLI::ExistingFile);
  compress->add_option("--method", ca.method, "Decomposition")
      ->check(CLI::IsMember({"cp", "tucker2", "svd", "wals"}))
      ->capture_default_str();
  compress->add_option("--norm", ca.norm, "Objective norm")
      ->check(CLI::IsMember({"frobenius", "sigma"}))
      ->capture_default_str();
  compress->add_option("--alpha", ca.alpha, "VBMF ratio for rank selection")->capture_default_str();
  compress->add_option("--epsilon", ca.epsilon, "Relative ridge added to Sigma")->capture_default_str();
  compress->add_option("--sweeps", ca.sweeps, "Maximum ALS sweeps")->capture_default_str();
  compress->add_option("--tol", ca.tol, "Relative objective tolerance")->capture_default_str();
  compress->add_option("--seed", ca.seed, "Seed for random initialisation")->capture_default_str();
  compress->add_option("--normalization", ca.normalization, "Sigma normalisation")
      ->check(CLI::IsMember({"mean", "sum"}))
      ->capture_default_str();
  compress->add_option("--out", ca.out, "Output directory for factor files")->capture_default_str();
  compress->add_option("--report", ca.report, "Report path (default OUT/report.json)");
  compress->add_option("--jobs", ca.jobs, "Layers compressed in parallel (SIGMA_LOWRANK_THREADS overrides)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  compress->add_flag("--omit-timing", ca.omit_timing, "Leave wall-clock timings out of the report");

  std::vector<std::string> patches;
  std::string sigma_out;
  std::string sigma_norm = "mean";
  auto* est = app.add_subcommand("estimate-sigma", "Estimate Sigma from unfolded input patches");
  est->add_option("--patches", patches, "Patch files (dim x N)")->required()->check(CLI::ExistingFile);
  est->add_option("--out", sigma_out, "Destination .npy")->required();
  est->add_option("--normalization", sigma_norm, "mean or sum")
      ->check(CLI::IsMember({"mean", "sum"}))
      ->capture_default_str();

  std::string kernel;
  std::string plan_method = "cp";
  double plan_alpha = 1.0;
  bool plan_verbose = false;
  auto* plan = app.add_subcommand("plan-ranks", "Print the ranks selected for a kernel");
  plan->add_option("--kernel", kernel, "Kernel .npy (4-D conv or 2-D linear)")->required()->check(CLI::ExistingFile);
  plan->add_option("--method", plan_method, "cp, tucker2 or svd")
      ->check(CLI::IsMember({"cp", "tucker2", "svd"}))
      ->capture_default_str();
  plan->add_option("--alpha", plan_alpha, "VBMF ratio")->capture_default_str();
  plan->add_flag("--verbose", plan_verbose, "Also print VBMF and maximal ranks");

  std::string report_path;
  std::string verify_out;
  double verify_tol = 1e-10;
  auto* verify = app.add_subcommand("verify", "Recompute a report from its factor files");
  verify->add_option("--report", report_path, "Report JSON")->required()->check(CLI::ExistingFile);
  verify->add_option("--out", verify_out, "Factor directory (default: the one recorded in the report)");
  verify->add_option("--tol", verify_tol, "Allowed relative deviation")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*compress) return cmd_compress(ca, out);
    if (*est) return cmd_estimate_sigma(patches, sigma_out, sigma_norm, out);
    if (*plan) return cmd_plan_ranks(kernel, plan_method, plan_alpha, plan_verbose, out);
    if (*verify) return cmd_verify(report_path, verify_out, verify_tol, out, err);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "failure: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitValidation;
}

}  // namespace sigmalr
