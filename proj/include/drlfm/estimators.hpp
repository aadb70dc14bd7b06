#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drlfm/cfsvd.hpp"
#include "drlfm/matrix.hpp"
#include "drlfm/normal.hpp"

namespace drlfm {

enum class Estimator { oi, ipw, dr };

std::string estimator_name(Estimator e);

/// Per-outcome average-treatment-effect estimate. Standard errors and
/// confidence intervals are reported for DR only; OI and IPW carry none.
struct AteResult {
  Index outcome_index = 0;
  double estimate = 0.0;
  std::optional<double> std_error;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  Estimator estimator = Estimator::dr;
  Index n_units = 0;
};

/// Simulation-side truth: mean potential outcomes, assignment
/// probabilities, and per-cell noise standard deviations.
struct GroundTruth {
  DenseMatrix theta0;
  DenseMatrix theta1;
  DenseMatrix p;
  DenseMatrix sigma0;
  DenseMatrix sigma1;
};

double true_ate(const GroundTruth& gt, Index j);

AteResult oi_estimate(const NuisanceEstimates& est, Index j);

AteResult ipw_estimate(const DenseMatrix& y, const DenseMatrix& a,
                       const DenseMatrix& p_hat, Index j);

AteResult dr_estimate(const DenseMatrix& y, const DenseMatrix& a,
                      const NuisanceEstimates& est, Index j,
                      double level = 0.95);

/// All three estimators for every outcome column; 3*M results ordered
/// (OI, IPW, DR) within each j.
std::vector<AteResult> estimate_all(const DenseMatrix& y,
                                    const DenseMatrix& a,
                                    const NuisanceEstimates& est,
                                    double level = 0.95);

/// sigma_bar_j^2: the asymptotic variance of the scaled DR error under the
/// true nuisances.
double true_asymptotic_variance(const GroundTruth& gt, Index j);

}  // namespace drlfm
