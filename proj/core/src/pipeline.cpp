#include "sigmalr/pipeline.hpp"

#include "sigmalr/decomp.hpp"
#include "sigmalr/error.hpp"
#include "sigmalr/npy.hpp"
#include "sigmalr/rank_select.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

namespace sigmalr {

namespace fs = std::filesystem;

std::string to_string(CompressMethod m) {
  switch (m) {
    case CompressMethod::cp: return "cp";
    case CompressMethod::tucker2: return "tucker2";
    case CompressMethod::svd: return "svd";
    case CompressMethod::wals: return "wals";
  }
  return "?";
}

std::string to_string(NormKind n) { return n == NormKind::sigma ? "sigma" : "frobenius"; }

CompressMethod parse_compress_method(const std::string& s) {
  if (s == "cp") return CompressMethod::cp;
  if (s == "tucker2") return CompressMethod::tucker2;
  if (s == "svd") return CompressMethod::svd;
  if (s == "wals") return CompressMethod::wals;
  throw ValidationError("unknown method '" + s + "' (expected cp, tucker2, svd or wals)");
}

NormKind parse_norm_kind(const std::string& s) {
  if (s == "frobenius") return NormKind::frobenius;
  if (s == "sigma") return NormKind::sigma;
  throw ValidationError("unknown norm '" + s + "' (expected frobenius or sigma)");
}

namespace {

std::string to_string(Normalization n) { return n == Normalization::mean ? "mean" : "sum"; }

Normalization parse_normalization(const std::string& s) {
  if (s == "mean") return Normalization::mean;
  if (s == "sum") return Normalization::sum;
  throw ValidationError("unknown normalization '" + s + "' (expected mean or sum)");
}

}  // namespace

void CompressConfig::validate() const {
  require(std::isfinite(alpha), "alpha must be finite");
  require(std::isfinite(epsilon) && epsilon >= 0.0, "epsilon must be >= 0");
  require(sweeps >= 1, "sweeps must be >= 1");
  require(std::isfinite(tol) && tol >= 0.0, "tol must be >= 0");
  require(jobs >= 1, "jobs must be >= 1");
  require(!(method == CompressMethod::wals && norm == NormKind::sigma),
          "conflicting options: --method wals fits element weights and cannot be combined with --norm sigma");
}

nlohmann::json CompressConfig::to_json() const {
  return {{"method", to_string(method)},
          {"norm", to_string(norm)},
          {"alpha", alpha},
          {"epsilon", epsilon},
          {"sweeps", sweeps},
          {"tol", tol},
          {"seed", seed},
          {"normalization", to_string(normalization)},
          {"out_dir", fs::absolute(out_dir).lexically_normal().string()}};
}

CompressConfig CompressConfig::from_json(const nlohmann::json& j) {
  CompressConfig c;
  try {
    c.method = parse_compress_method(j.at("method").get<std::string>());
    c.norm = parse_norm_kind(j.at("norm").get<std::string>());
    c.alpha = j.at("alpha").get<double>();
    c.epsilon = j.at("epsilon").get<double>();
    c.sweeps = j.at("sweeps").get<int>();
    c.tol = j.at("tol").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.normalization = parse_normalization(j.value("normalization", std::string("mean")));
    c.out_dir = j.at("out_dir").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("report config: ") + ex.what());
  }
  c.validate();
  return c;
}

int effective_jobs(int jobs) {
  if (const char* env = std::getenv("SIGMA_LOWRANK_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(jobs, 1);
}

namespace {

template <class T>
nlohmann::json opt_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <class T>
std::optional<T> json_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace

nlohmann::json LayerReport::to_json() const {
  return {{"name", name},
          {"kind", to_string(kind)},
          {"skipped", skipped},
          {"method", method},
          {"norm", norm},
          {"ranks", ranks},
          {"r_vbmf", r_vbmf},
          {"r_max", r_max},
          {"ranks_from_manifest", ranks_from_manifest},
          {"sweeps", sweeps},
          {"converged", converged},
          {"rel_error_frobenius", opt_json(rel_error_frobenius)},
          {"rel_error_sigma", opt_json(rel_error_sigma)},
          {"functional_error", opt_json(functional_error)},
          {"relative_functional_error", opt_json(relative_functional_error)},
          {"sigma_epsilon", opt_json(sigma_epsilon)},
          {"original_params", original_params},
          {"compressed_params", compressed_params},
          {"factor_files", factor_files}};
}

LayerReport LayerReport::from_json(const nlohmann::json& j) {
  LayerReport r;
  r.name = j.at("name").get<std::string>();
  r.kind = parse_layer_kind(j.at("kind").get<std::string>());
  r.skipped = j.at("skipped").get<bool>();
  r.method = j.at("method").get<std::string>();
  r.norm = j.at("norm").get<std::string>();
  r.ranks = j.at("ranks").get<std::vector<Index>>();
  r.r_vbmf = j.at("r_vbmf").get<std::vector<Index>>();
  r.r_max = j.at("r_max").get<std::vector<Index>>();
  r.ranks_from_manifest = j.value("ranks_from_manifest", false);
  r.sweeps = j.at("sweeps").get<int>();
  r.converged = j.at("converged").get<bool>();
  r.rel_error_frobenius = json_opt<double>(j, "rel_error_frobenius");
  r.rel_error_sigma = json_opt<double>(j, "rel_error_sigma");
  r.functional_error = json_opt<double>(j, "functional_error");
  r.relative_functional_error = json_opt<double>(j, "relative_functional_error");
  r.sigma_epsilon = json_opt<double>(j, "sigma_epsilon");
  r.original_params = j.at("original_params").get<Index>();
  r.compressed_params = j.at("compressed_params").get<Index>();
  r.factor_files = j.at("factor_files").get<std::map<std::string, std::string>>();
  return r;
}

void CompressionReport::compute_totals() {
  original_params = 0;
  compressed_params = 0;
  for (const LayerReport& l : layers) {
    original_params += l.original_params;
    compressed_params += l.compressed_params;
  }
  compression_ratio =
      compressed_params > 0 ? static_cast<double>(original_params) / static_cast<double>(compressed_params) : 0.0;
}

nlohmann::json CompressionReport::to_json(bool include_timing) const {
  nlohmann::json layers_j = nlohmann::json::array();
  for (const LayerReport& l : layers) layers_j.push_back(l.to_json());
  nlohmann::json j{{"schema", schema},
                   {"model", model},
                   {"manifest", manifest},
                   {"config", config},
                   {"status", status},
                   {"layers", std::move(layers_j)},
                   {"totals",
                    {{"original_params", original_params},
                     {"compressed_params", compressed_params},
                     {"compression_ratio", compression_ratio}}}};
  if (error) j["error"] = *error;
  if (include_timing) {
    nlohmann::json per_layer = nlohmann::json::object();
    for (const LayerReport& l : layers) per_layer[l.name] = l.seconds;
    j["timing"] = {{"total_seconds", total_seconds}, {"layers", std::move(per_layer)}};
  }
  return j;
}

std::string CompressionReport::dump(bool include_timing) const { return to_json(include_timing).dump(2) + "\n"; }

CompressionReport CompressionReport::from_json(const nlohmann::json& j) {
  CompressionReport r;
  try {
    r.schema = j.at("schema").get<std::string>();
    require(r.schema == kReportSchema,
            "report schema '" + r.schema + "' is not supported (expected " + kReportSchema + ")");
    r.model = j.at("model").get<std::string>();
    r.manifest = j.at("manifest").get<std::string>();
    r.config = j.at("config");
    r.status = j.at("status").get<std::string>();
    r.error = json_opt<std::string>(j, "error");
    for (const auto& l : j.at("layers")) r.layers.push_back(LayerReport::from_json(l));
    const auto& t = j.at("totals");
    r.original_params = t.at("original_params").get<Index>();
    r.compressed_params = t.at("compressed_params").get<Index>();
    r.compression_ratio = t.at("compression_ratio").get<double>();
    if (j.contains("timing")) {
      const auto& tj = j.at("timing");
      r.total_seconds = tj.value("total_seconds", 0.0);
      for (LayerReport& l : r.layers)
        if (tj.contains("layers") && tj.at("layers").contains(l.name)) l.seconds = tj.at("layers").at(l.name);
    }
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("report: ") + ex.what());
  }
  return r;
}

CompressionReport CompressionReport::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError("report '" + path.string() + "': " + ex.what());
  }
  return from_json(j);
}

double evaluate_functional_error(const Mat& a, const Mat& a_tilde, const Mat& patches) {
  require(a.rows() == a_tilde.rows() && a.cols() == a_tilde.cols(), "functional error: operator shape mismatch");
  require(patches.rows() == a.cols(), "functional error: patch dimension " + std::to_string(patches.rows()) +
                                          " does not match the layer input dimension " + std::to_string(a.cols()));
  require(patches.cols() > 0, "functional error: no patches");
  const Mat diff = (a - a_tilde) * patches;
  return std::sqrt(diff.squaredNorm() / static_cast<double>(patches.cols()));
}

double evaluate_functional_error(const Tensor4& k, const Tensor4& k_tilde, const Mat& patches) {
  require(k.dims() == k_tilde.dims(), "functional error: kernel dimension mismatch");
  return evaluate_functional_error(unfold_mode(k, 1), unfold_mode(k_tilde, 1), patches);
}

Mat estimate_sigma_from_files(const std::vector<fs::path>& files, Normalization norm) {
  require(!files.empty(), "estimate-sigma: no patch files given");
  SigmaAccumulator acc;
  for (const fs::path& f : files) {
    const Mat p = read_matrix(f);
    if (acc.dim() == 0) acc = SigmaAccumulator(p.rows());
    require(p.rows() == acc.dim(), f.string() + ": patch dimension " + std::to_string(p.rows()) +
                                       " differs from earlier files (" + std::to_string(acc.dim()) + ")");
    acc.add(p);
  }
  return acc.finalize(norm);
}

namespace {

using FactorSet = std::map<std::string, TensorValue>;

struct LayerInputs {
  TensorValue kernel;
  Mat kernel_mat;  // mode-1 unfolding for conv layers
  std::optional<SigmaRoot> root;
  std::optional<Mat> eval_patches;
  std::optional<Tensor4> weights;
};

std::vector<Index> shape_of(const TensorValue& v) {
  if (const auto* t = std::get_if<Tensor4>(&v)) {
    const Dims4 d = t->dims();
    return {d.T, d.S, d.H, d.W};
  }
  const Mat& m = std::get<Mat>(v);
  return {m.rows(), m.cols()};
}

std::string shape_str(const std::vector<Index>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + ")";
}

Index value_size(const TensorValue& v) {
  if (const auto* t = std::get_if<Tensor4>(&v)) return t->size();
  return std::get<Mat>(v).size();
}

SymSolveConfig solver_config(const CompressConfig& cfg) {
  SymSolveConfig s;
  s.epsilon_scale = cfg.epsilon;
  return s;
}

LayerInputs load_inputs(const ModelManifest& manifest, const LayerEntry& layer, const CompressConfig& cfg,
                        bool need_weights) {
  LayerInputs in;
  in.kernel = read_tensor(manifest.resolve(layer.kernel_file));
  const std::vector<Index> shape = shape_of(in.kernel);
  require(shape == layer.dims, "layer '" + layer.name + "': kernel file shape " + shape_str(shape) +
                                   " does not match manifest dims " + shape_str(layer.dims));
  in.kernel_mat = layer.kind == LayerKind::conv ? unfold_mode(std::get<Tensor4>(in.kernel), 1)
                                                : std::get<Mat>(in.kernel);
  if (layer.skip) return in;

  const Index dim = layer.input_dim();
  std::optional<Mat> patches;
  if (layer.patches_file) {
    patches = read_matrix(manifest.resolve(*layer.patches_file));
    require(patches->rows() == dim, "layer '" + layer.name + "': patches have " + std::to_string(patches->rows()) +
                                        " rows, expected input dimension " + std::to_string(dim));
    require(patches->cols() > 0, "layer '" + layer.name + "': patches file has no columns");
  }
  if (layer.eval_patches_file) {
    in.eval_patches = read_matrix(manifest.resolve(*layer.eval_patches_file));
    require(in.eval_patches->rows() == dim, "layer '" + layer.name + "': eval patches have " +
                                                std::to_string(in.eval_patches->rows()) +
                                                " rows, expected input dimension " + std::to_string(dim));
  } else {
    in.eval_patches = patches;
  }

  std::optional<Mat> sigma;
  if (layer.sigma_file) {
    sigma = read_matrix(manifest.resolve(*layer.sigma_file));
    require(sigma->rows() == dim && sigma->cols() == dim,
            "layer '" + layer.name + "': sigma file must be " + std::to_string(dim) + "x" + std::to_string(dim));
  } else if (patches) {
    SigmaAccumulator acc(dim);
    acc.add(*patches);
    sigma = acc.finalize(cfg.normalization);
  }
  if (sigma) in.root = SigmaRoot::from_sigma(*sigma, solver_config(cfg));

  if (need_weights && layer.kind == LayerKind::conv) {
    in.weights = read_tensor4(manifest.resolve(*layer.weights_file));
    require(in.weights->dims() == std::get<Tensor4>(in.kernel).dims(),
            "layer '" + layer.name + "': weights file shape does not match the kernel");
  }
  return in;
}

// The layer's operator (T x SHW or m x n) rebuilt from its factors.
Mat reconstruct(const std::string& method, const LayerEntry& layer, const FactorSet& f) {
  const auto mat = [&](const char* role) -> const Mat& { return std::get<Mat>(f.at(role)); };
  if (method == "skip") {
    const TensorValue& k = f.at("K");
    return layer.kind == LayerKind::conv ? unfold_mode(std::get<Tensor4>(k), 1) : std::get<Mat>(k);
  }
  if (method == "svd") return mat("A") * mat("B");
  if (method == "cp") {
    CpFactors c{mat("U_T"), mat("U_S"), mat("U_H"), mat("U_W")};
    c.validate();
    return unfold_mode(cp_reconstruct(c), 1);
  }
  if (method == "tucker2" || method == "wals") {
    Tucker2Factors t{std::get<Tensor4>(f.at("G")), mat("U_T"), mat("U_S")};
    t.validate();
    return unfold_mode(tucker2_reconstruct(t), 1);
  }
  throw ValidationError("unknown layer method '" + method + "'");
}

// Errors of `approx` against the original operator, written into `r`.
void fill_errors(LayerReport& r, const LayerInputs& in, const Mat& approx) {
  const Mat& a = in.kernel_mat;
  require(approx.rows() == a.rows() && approx.cols() == a.cols(),
          "layer '" + r.name + "': reconstruction has the wrong shape");
  const double fro = a.norm();
  require(fro > 0.0, "layer '" + r.name + "': kernel is identically zero");
  const Mat diff = a - approx;
  r.rel_error_frobenius = diff.norm() / fro;
  r.rel_error_sigma.reset();
  r.sigma_epsilon.reset();
  if (in.root) {
    r.rel_error_sigma = (diff * in.root->L).norm() / (a * in.root->L).norm();
    r.sigma_epsilon = in.root->epsilon;
  }
  r.functional_error.reset();
  r.relative_functional_error.reset();
  if (in.eval_patches && in.eval_patches->cols() > 0) {
    const Mat& p = *in.eval_patches;
    r.functional_error = evaluate_functional_error(a, approx, p);
    const double base = std::sqrt((a * p).squaredNorm() / static_cast<double>(p.cols()));
    if (base > 0.0) r.relative_functional_error = *r.functional_error / base;
  }
}

std::string effective_method(const LayerEntry& layer, CompressMethod m) {
  if (layer.skip) return "skip";
  if (layer.kind == LayerKind::linear) return "svd";
  return to_string(m);
}

PlanMethod plan_method_for(CompressMethod m) {
  switch (m) {
    case CompressMethod::cp: return PlanMethod::cp;
    case CompressMethod::tucker2:
    case CompressMethod::wals: return PlanMethod::tucker2;
    case CompressMethod::svd: return PlanMethod::svd;
  }
  return PlanMethod::cp;
}

LayerReport compress_layer(const ModelManifest& manifest, const LayerEntry& layer, const CompressConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  LayerReport r;
  r.name = layer.name;
  r.kind = layer.kind;
  r.skipped = layer.skip;
  r.method = effective_method(layer, cfg.method);
  r.norm = to_string(cfg.norm);
  r.original_params = layer.parameter_count();

  const bool wals = r.method == "wals";
  const LayerInputs in = load_inputs(manifest, layer, cfg, wals);
  FactorSet factors;

  if (layer.skip) {
    factors["K"] = in.kernel;
  } else {
    RankPlan plan = layer.kind == LayerKind::conv
                        ? plan_ranks(std::get<Tensor4>(in.kernel), plan_method_for(cfg.method), cfg.alpha)
                        : plan_ranks(in.kernel_mat, cfg.alpha);
    if (layer.ranks) {
      require(layer.ranks->size() == plan.ranks.size(),
              "layer '" + layer.name + "': manifest ranks need " + std::to_string(plan.ranks.size()) +
                  " entries for method " + r.method);
      for (std::size_t i = 0; i < plan.ranks.size(); ++i)
        require((*layer.ranks)[i] <= plan.r_max[i], "layer '" + layer.name + "': manifest rank " +
                                                        std::to_string((*layer.ranks)[i]) + " exceeds R_max " +
                                                        std::to_string(plan.r_max[i]));
      plan.ranks = *layer.ranks;
      r.ranks_from_manifest = true;
    }
    r.ranks = plan.ranks;
    r.r_vbmf = plan.r_vbmf;
    r.r_max = plan.r_max;

    const bool sigma = cfg.norm == NormKind::sigma;
    if (sigma && !in.root)
      throw ValidationError("layer '" + layer.name + "': --norm sigma needs patches_file or sigma_file");

    AlsConfig als;
    als.max_sweeps = cfg.sweeps;
    als.rel_tol = cfg.tol;
    als.seed = cfg.seed;
    als.solver = solver_config(cfg);

    if (r.method == "svd") {
      r.sweeps = 0;
      if (sigma) {
        SvdFactors s = svd_sigma(in.kernel_mat, *in.root, plan.ranks[0]);
        factors["A"] = std::move(s.A);
        factors["B"] = std::move(s.B);
      } else {
        const TruncatedSvd t = truncated_svd(in.kernel_mat, plan.ranks[0]);
        factors["A"] = Mat(t.U * t.s.asDiagonal());
        factors["B"] = Mat(t.V.transpose());
      }
    } else if (r.method == "cp") {
      const Tensor4& k = std::get<Tensor4>(in.kernel);
      CpResult res = sigma ? cp_als_sigma(k, *in.root, plan.ranks[0], als) : cp_als(k, plan.ranks[0], als);
      r.sweeps = res.sweeps;
      r.converged = res.converged;
      factors["U_T"] = std::move(res.factors.U_T);
      factors["U_S"] = std::move(res.factors.U_S);
      factors["U_H"] = std::move(res.factors.U_H);
      factors["U_W"] = std::move(res.factors.U_W);
    } else {
      const Tensor4& k = std::get<Tensor4>(in.kernel);
      Tucker2Result res = wals    ? wals_tucker2(k, *in.weights, plan.ranks[0], plan.ranks[1], als)
                          : sigma ? tucker2_als_sigma(k, *in.root, plan.ranks[0], plan.ranks[1], als)
                                  : tucker2_als(k, plan.ranks[0], plan.ranks[1], als);
      r.sweeps = res.sweeps;
      r.converged = res.converged;
      factors["U_T"] = std::move(res.factors.U_T);
      factors["U_S"] = std::move(res.factors.U_S);
      factors["G"] = std::move(res.factors.G);
    }
  }

  for (const auto& [role, value] : factors) {
    if (const auto* m = std::get_if<Mat>(&value))
      if (!m->allFinite()) throw NumericalError("layer '" + layer.name + "': non-finite factor " + role);
    const std::string file = layer.name + "." + role + ".npy";
    write_tensor(cfg.out_dir / file, value);
    r.factor_files[role] = file;
    r.compressed_params += value_size(value);
  }
  fill_errors(r, in, reconstruct(r.method, layer, factors));
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

enum class FailureKind { validation, numerical, io, other };

struct Failure {
  FailureKind kind = FailureKind::other;
  std::string message;
};

void write_report(const CompressionReport& report, const CompressConfig& cfg) {
  if (!cfg.report_path) return;
  std::ofstream out(*cfg.report_path, std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + cfg.report_path->string() + "'");
  out << report.dump(cfg.include_timing);
}

}  // namespace

CompressionReport compress_model(const ModelManifest& manifest, const CompressConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  manifest.validate();
  for (const LayerEntry& l : manifest.layers) {
    if (l.skip) continue;
    if (cfg.norm == NormKind::sigma && !l.patches_file && !l.sigma_file)
      throw ValidationError("layer '" + l.name +
                            "': --norm sigma needs a patches_file or sigma_file entry in the manifest "
                            "(run estimate-sigma to produce a sigma file, or use --norm frobenius)");
    if (cfg.method == CompressMethod::wals && l.kind == LayerKind::conv && !l.weights_file)
      throw ValidationError("layer '" + l.name + "': --method wals needs a weights_file entry in the manifest");
  }
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw IoError("cannot create output directory '" + cfg.out_dir.string() + "': " + ec.message());

  const std::size_t n = manifest.layers.size();
  std::vector<std::optional<LayerReport>> done(n);
  std::vector<std::optional<Failure>> failed(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> abort{false};

  const auto worker = [&] {
    for (;;) {
      if (abort.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      const LayerEntry& layer = manifest.layers[i];
      try {
        done[i] = compress_layer(manifest, layer, cfg);
        continue;
      } catch (const ValidationError& e) {
        failed[i] = Failure{FailureKind::validation, e.what()};
      } catch (const NumericalError& e) {
        failed[i] = Failure{FailureKind::numerical, e.what()};
      } catch (const IoError& e) {
        failed[i] = Failure{FailureKind::io, e.what()};
      } catch (const std::exception& e) {
        failed[i] = Failure{FailureKind::other, e.what()};
      }
      abort.store(true);
    }
  };

  const int jobs = std::min<int>(effective_jobs(cfg.jobs), static_cast<int>(n));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  CompressionReport report;
  report.model = manifest.model;
  report.manifest = manifest.source.string();
  report.config = cfg.to_json();
  for (auto& l : done)
    if (l) report.layers.push_back(std::move(*l));
  report.compute_totals();

  std::optional<Failure> first;
  std::string failed_layer;
  for (std::size_t i = 0; i < n && !first; ++i)
    if (failed[i]) {
      first = failed[i];
      failed_layer = manifest.layers[i].name;
    }
  if (first) {
    report.status = "failed";
    report.error = first->message;
  }
  report.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  write_report(report, cfg);

  if (first) {
    const std::string msg = first->message.find("layer '") == 0
                                ? first->message
                                : "layer '" + failed_layer + "': " + first->message;
    switch (first->kind) {
      case FailureKind::validation: throw ValidationError(msg);
      case FailureKind::numerical: throw NumericalError(msg);
      case FailureKind::io: throw IoError(msg);
      case FailureKind::other: throw std::runtime_error(msg);
    }
  }
  return report;
}

VerifyResult verify_report(const CompressionReport& report, std::optional<fs::path> out_dir, double tol) {
  VerifyResult v;
  const auto problem = [&](std::string msg) {
    v.ok = false;
    v.problems.push_back(std::move(msg));
  };

  CompressConfig cfg = CompressConfig::from_json(report.config);
  if (out_dir) cfg.out_dir = *out_dir;
  require(!report.manifest.empty(), "report does not record a manifest file");
  const fs::path manifest_path = report.manifest;
  ModelManifest manifest = ModelManifest::load(manifest_path);

  const auto close = [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); };
  const auto check = [&](const std::string& who, const char* what, const std::optional<double>& recorded,
                         const std::optional<double>& recomputed) {
    if (recorded.has_value() != recomputed.has_value()) {
      problem(who + ": " + what + (recorded ? " recorded but cannot be recomputed" : " missing from report"));
    } else if (recorded && !close(*recorded, *recomputed)) {
      std::ostringstream os;
      os.precision(17);
      os << who << ": " << what << " recorded " << *recorded << ", recomputed " << *recomputed;
      problem(os.str());
    }
  };

  for (const LayerReport& lr : report.layers) {
    const std::string who = "layer '" + lr.name + "'";
    const auto it = std::find_if(manifest.layers.begin(), manifest.layers.end(),
                                 [&](const LayerEntry& e) { return e.name == lr.name; });
    if (it == manifest.layers.end()) {
      problem(who + ": not present in manifest " + manifest_path.string());
      continue;
    }
    const LayerEntry& layer = *it;
    if (lr.original_params != layer.parameter_count())
      problem(who + ": original_params " + std::to_string(lr.original_params) + " != " +
              std::to_string(layer.parameter_count()));

    FactorSet factors;
    Index params = 0;
    try {
      for (const auto& [role, file] : lr.factor_files) {
        TensorValue val = read_tensor(cfg.out_dir / file);
        params += value_size(val);
        factors[role] = std::move(val);
      }
      const LayerInputs in = load_inputs(manifest, layer, cfg, false);
      const Mat approx = reconstruct(lr.method, layer, factors);
      LayerReport re = lr;
      fill_errors(re, in, approx);
      check(who, "rel_error_frobenius", lr.rel_error_frobenius, re.rel_error_frobenius);
      check(who, "rel_error_sigma", lr.rel_error_sigma, re.rel_error_sigma);
      check(who, "functional_error", lr.functional_error, re.functional_error);
      check(who, "relative_functional_error", lr.relative_functional_error, re.relative_functional_error);
    } catch (const std::exception& e) {
      problem(who + ": " + e.what());
      continue;
    }
    if (params != lr.compressed_params)
      problem(who + ": compressed_params " + std::to_string(lr.compressed_params) + " but factor files hold " +
              std::to_string(params));
  }

  CompressionReport totals = report;
  totals.compute_totals();
  if (totals.original_params != report.original_params || totals.compressed_params != report.compressed_params)
    problem("totals: parameter sums do not match the layer records");
  if (totals.compression_ratio != report.compression_ratio)
    problem("totals: compression_ratio does not match the layer records");
  return v;
}

}  // namespace sigmalr
