#include "sigmalr/rank_select.hpp"

#include "sigmalr/decomp.hpp"
#include "sigmalr/error.hpp"

#include <cmath>

namespace sigmalr {

Index r_alpha(Index r_vbmf, Index r_max, double alpha) {
  require(r_max >= 1, "r_alpha: R_max must be >= 1");
  require(r_vbmf >= 0, "r_alpha: R_VBMF must be >= 0");
  require(r_vbmf <= r_max, "r_alpha: R_VBMF (" + std::to_string(r_vbmf) + ") exceeds R_max (" +
                               std::to_string(r_max) + ")");
  require(std::isfinite(alpha), "r_alpha: alpha must be finite");
  const double v = static_cast<double>(r_vbmf) + (1.0 - alpha) * static_cast<double>(r_max - r_vbmf);
  const double rounded = std::round(v);  // half away from zero
  return static_cast<Index>(std::clamp(rounded, 1.0, static_cast<double>(r_max)));
}

std::string to_string(PlanMethod m) {
  switch (m) {
    case PlanMethod::cp: return "cp";
    case PlanMethod::tucker2: return "tucker2";
    case PlanMethod::svd: return "svd";
  }
  return "?";
}

PlanMethod parse_plan_method(const std::string& s) {
  if (s == "cp") return PlanMethod::cp;
  if (s == "tucker2") return PlanMethod::tucker2;
  if (s == "svd") return PlanMethod::svd;
  throw ValidationError("unknown rank-planning method '" + s + "' (expected cp, tucker2 or svd)");
}

void RankPlan::validate() const {
  require(!ranks.empty() && ranks.size() == r_vbmf.size() && ranks.size() == r_max.size(),
          "RankPlan: inconsistent component counts");
  for (std::size_t i = 0; i < ranks.size(); ++i)
    require(ranks[i] >= 1 && ranks[i] <= r_max[i], "RankPlan: rank outside [1, R_max]");
}

RankPlan plan_ranks(const Tensor4& k, PlanMethod method, double alpha) {
  const Dims4 d = k.dims();
  RankPlan plan;
  plan.method = method;
  plan.alpha = alpha;
  switch (method) {
    case PlanMethod::cp: {
      Index rv = 0;
      for (int m = 1; m <= 4; ++m) rv = std::max(rv, vbmf_rank(unfold_mode(k, m)));
      const Index rmax = cp_rank_bound(d);
      rv = std::min(rv, rmax);
      plan.r_vbmf = {rv};
      plan.r_max = {rmax};
      plan.ranks = {r_alpha(rv, rmax, alpha)};
      break;
    }
    case PlanMethod::tucker2: {
      const Index rt = vbmf_rank(unfold_mode(k, 1));
      const Index rs = vbmf_rank(unfold_mode(k, 2));
      plan.r_vbmf = {rt, rs};
      plan.r_max = {d.T, d.S};
      plan.ranks = {r_alpha(rt, d.T, alpha), r_alpha(rs, d.S, alpha)};
      break;
    }
    case PlanMethod::svd:
      return plan_ranks(unfold_mode(k, 1), alpha);
  }
  plan.validate();
  return plan;
}

RankPlan plan_ranks(const Mat& w, double alpha) {
  RankPlan plan;
  plan.method = PlanMethod::svd;
  plan.alpha = alpha;
  const Index rmax = std::min(w.rows(), w.cols());
  const Index rv = vbmf_rank(w);
  plan.r_vbmf = {rv};
  plan.r_max = {rmax};
  plan.ranks = {r_alpha(rv, rmax, alpha)};
  plan.validate();
  return plan;
}

}  // namespace sigmalr
