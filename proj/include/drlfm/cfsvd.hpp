#pragma once

#include "drlfm/crossfit.hpp"
#include "drlfm/matrix.hpp"

namespace drlfm {

/// Hyper-parameters of the cross-fitted SVD nuisance estimator: TW ranks
/// for the assignment matrix and the two zero-filled outcome matrices, and
/// the positivity bound used to project the propensity estimate.
struct CfsvdConfig {
  int rank_a = 1;      // TW rank for A
  int rank_y0bar = 2;  // TW rank for zero-filled control outcomes
  int rank_y1bar = 1;  // TW rank for zero-filled treated outcomes
  double lambda_bar = 0.05;

  /// Ranks implied by the factor-model dimensions: the Hadamard products
  /// estimated from the zero-filled outcomes have ranks
  /// r_theta0 * (r_p + 1) and r_theta1 * r_p.
  static CfsvdConfig from_model_ranks(int r_p, int r_theta0, int r_theta1,
                                      double lambda_bar = 0.05);

  void validate() const;
};

struct NuisanceEstimates {
  DenseMatrix theta0_hat;
  DenseMatrix theta1_hat;
  DenseMatrix p_hat;
};

/// Entry-wise clamp to [lo, hi].
DenseMatrix project_interval(const DenseMatrix& m, double lo, double hi);

/// P_hat: cross-fitted TW on A, projected to [lambda_bar, 1 - lambda_bar].
DenseMatrix estimate_propensity(const DenseMatrix& a, const BlockPartition& p,
                                const CfsvdConfig& cfg);

/// Theta_hat for one arm: cross-fitted TW on the zero-filled outcome matrix
/// y .* a (arm 1) or y .* (1 - a) (arm 0), divided entry-wise by p_hat
/// (resp. 1 - p_hat). Binariness of `a` is the caller's contract; the
/// routine itself only forms the products.
DenseMatrix estimate_theta(const DenseMatrix& y, const DenseMatrix& a,
                           const DenseMatrix& p_hat, int arm,
                           const BlockPartition& p, const CfsvdConfig& cfg);

/// Full pipeline; `a` must be a 0/1 matrix.
NuisanceEstimates cfsvd(const DenseMatrix& y, const DenseMatrix& a,
                        const BlockPartition& p, const CfsvdConfig& cfg);

void require_binary(const DenseMatrix& a, const char* what);

}  // namespace drlfm
