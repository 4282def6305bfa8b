#pragma once

// Rank selection: empirical variational-Bayes matrix factorisation (global
// analytic solution) applied to unfoldings, and the alpha interpolation
// between the VBMF rank and the maximal rank.

#include "sigmalr/tensor.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sigmalr {

struct VbmfResult {
  Index rank = 0;
  double noise_variance = 0.0;
  double threshold = 0.0;  // singular values above this are retained
};

/// Global analytic EVB solution. The noise variance is estimated by
/// minimising the free energy when not supplied.
VbmfResult vbmf(const Mat& m, std::optional<double> noise_variance = std::nullopt);
Index vbmf_rank(const Mat& m, std::optional<double> noise_variance = std::nullopt);

/// Zero of Phi(t) + Phi(t/alpha), Phi(z) = log(z+1)/z - 1/2, for 0 < alpha <= 1.
double vbmf_tau_bar(double alpha);

/// round(r_vbmf + (1 - alpha)(r_max - r_vbmf)), half away from zero, clamped
/// to [1, r_max].
Index r_alpha(Index r_vbmf, Index r_max, double alpha);

enum class PlanMethod { cp, tucker2, svd };

std::string to_string(PlanMethod m);
PlanMethod parse_plan_method(const std::string& s);

struct RankPlan {
  PlanMethod method = PlanMethod::cp;
  double alpha = 1.0;
  std::vector<Index> ranks;   // cp: {R}; tucker2: {R_T, R_S}; svd: {R}
  std::vector<Index> r_vbmf;  // per component
  std::vector<Index> r_max;   // per component

  void validate() const;
};

/// cp: R_VBMF = max over the four unfoldings, R_max = floor(TSHW/max dim).
/// tucker2: VBMF on the mode-1 and mode-2 unfoldings, R_max = T and S.
/// svd: VBMF on the mode-1 unfolding, R_max = min(T, SHW).
RankPlan plan_ranks(const Tensor4& k, PlanMethod method, double alpha);
/// Matrix (linear layer) plan; method is svd.
RankPlan plan_ranks(const Mat& w, double alpha);

}  // namespace sigmalr
