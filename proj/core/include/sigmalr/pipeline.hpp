#pragma once

// Per-model orchestration: load each manifest layer, build its Sigma root,
// plan ranks, decompose, write factor files and assemble the report.
//
// Factor files are written to the output directory as {layer}.U_T.npy,
// {layer}.U_S.npy, {layer}.U_H.npy, {layer}.U_W.npy (cp), {layer}.U_T.npy,
// {layer}.U_S.npy, {layer}.G.npy (tucker2, wals) or {layer}.A.npy,
// {layer}.B.npy (svd, linear layers). Skipped layers are copied to
// {layer}.K.npy.

#include "sigmalr/covariance.hpp"
#include "sigmalr/manifest.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sigmalr {

inline constexpr const char* kReportSchema = "sigma-lowrank/1";

enum class CompressMethod { cp, tucker2, svd, wals };
enum class NormKind { frobenius, sigma };

std::string to_string(CompressMethod m);
std::string to_string(NormKind n);
CompressMethod parse_compress_method(const std::string& s);
NormKind parse_norm_kind(const std::string& s);

struct CompressConfig {
  CompressMethod method = CompressMethod::cp;
  NormKind norm = NormKind::frobenius;
  double alpha = 1.0;
  double epsilon = 1e-6;  // relative ridge on Sigma
  int sweeps = 50;
  double tol = 1e-6;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::mean;
  std::filesystem::path out_dir = ".";
  std::optional<std::filesystem::path> report_path;  // written even on failure
  int jobs = 1;
  bool include_timing = true;

  void validate() const;
  /// Fields that determine the numerical result (jobs and timing excluded).
  nlohmann::json to_json() const;
  static CompressConfig from_json(const nlohmann::json& j);
};

/// SIGMA_LOWRANK_THREADS when set to a positive integer, otherwise `jobs`.
int effective_jobs(int jobs);

struct LayerReport {
  std::string name;
  LayerKind kind = LayerKind::conv;
  bool skipped = false;
  std::string method;  // "cp", "tucker2", "svd", "wals" or "skip"
  std::string norm;
  std::vector<Index> ranks;
  std::vector<Index> r_vbmf;
  std::vector<Index> r_max;
  bool ranks_from_manifest = false;
  int sweeps = 0;
  bool converged = true;
  std::optional<double> rel_error_frobenius;
  std::optional<double> rel_error_sigma;
  std::optional<double> functional_error;
  std::optional<double> relative_functional_error;
  std::optional<double> sigma_epsilon;
  Index original_params = 0;
  Index compressed_params = 0;
  std::map<std::string, std::string> factor_files;  // role -> file name in out_dir
  double seconds = 0.0;

  nlohmann::json to_json() const;  // without timing
  static LayerReport from_json(const nlohmann::json& j);
};

struct CompressionReport {
  std::string schema = kReportSchema;
  std::string model;
  std::string manifest;  // absolute path
  nlohmann::json config;
  std::vector<LayerReport> layers;
  Index original_params = 0;
  Index compressed_params = 0;
  double compression_ratio = 0.0;
  std::string status = "ok";  // "ok" or "failed"
  std::optional<std::string> error;
  double total_seconds = 0.0;

  void compute_totals();
  nlohmann::json to_json(bool include_timing = true) const;
  std::string dump(bool include_timing = true) const;
  static CompressionReport from_json(const nlohmann::json& j);
  static CompressionReport load(const std::filesystem::path& path);
};

/// Compresses every layer of the manifest. On a layer failure the report
/// of completed layers (status "failed") is written to cfg.report_path when
/// set and the layer's exception is rethrown.
CompressionReport compress_model(const ModelManifest& manifest, const CompressConfig& cfg);

/// sqrt(mean_j ||(A - A~) u_j||^2) over the columns u_j of `patches`.
double evaluate_functional_error(const Mat& a, const Mat& a_tilde, const Mat& patches);
double evaluate_functional_error(const Tensor4& k, const Tensor4& k_tilde, const Mat& patches);

struct VerifyResult {
  bool ok = true;
  std::vector<std::string> problems;
};

/// Recomputes every error and parameter count of a report from its factor
/// files. `out_dir` defaults to the directory recorded in the report.
VerifyResult verify_report(const CompressionReport& report, std::optional<std::filesystem::path> out_dir = {},
                           double tol = 1e-10);

/// Estimates Sigma from one or more patch files (each dim x N).
Mat estimate_sigma_from_files(const std::vector<std::filesystem::path>& files, Normalization norm);

}  // namespace sigmalr
