#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "drlfm/estimators.hpp"
#include "drlfm/matrix.hpp"

namespace drlfm {

/// Configuration for the lagged-effects DR estimator on an N x T panel.
/// Column t holds the outcome at time t+1 in 1-based time; y0 supplies the
/// pre-sample outcomes y_{i,0}. The estimate sums the most recent window_J
/// columns with geometric weights; no confidence interval is reported.
struct LaggedConfig {
  double alpha0_hat = 0.0;
  double alpha1_hat = 0.0;
  int horizon_T = 1;  // number of panel columns used (T)
  int window_J = 1;   // 1 <= window_J <= horizon_T
  std::vector<double> y0;
};

/// Residual matrices per arm: entry (i,t) is y_{i,t} - alpha_a * y_{i,t-1}
/// where the arm-a matrix is observed exactly on cells with a_{i,t} = a.
std::pair<MaskedMatrix, MaskedMatrix> residual_matrices(
    const DenseMatrix& y, const DenseMatrix& a, double alpha0, double alpha1,
    const std::vector<double>& y0);

/// Least-squares fallback for the auto-regressive coefficient: slope of the
/// per-time demeaned outcome on the lagged outcome over cells with
/// a_{i,t} = a_{i,t-1} = arm, clamped to [-0.99, 0.99]. The demeaning
/// absorbs theta only when it is constant across units at each time, so
/// this is a convenience estimate; callers may supply their own alpha.
double estimate_alpha(const DenseMatrix& y, const DenseMatrix& a, int arm);

/// DR estimate of the time-T contrast between always-treat and never-treat
/// with lagged carry-over. Nuisances must be estimated on the residual
/// matrices. With alpha = 0 and window_J = 1 this reduces exactly to the
/// static DR estimator at column T.
AteResult dr_lagged_estimate(const DenseMatrix& y, const DenseMatrix& a,
                             const NuisanceEstimates& est,
                             const LaggedConfig& cfg);

enum class StaggeredLink { linear, geometric };

/// Staggered-adoption estimator settings. t0 is the number of pre-period
/// columns during which every unit is under control; target_t is the
/// 0-based column at which effects are estimated (t0 <= target_t < T).
struct StaggeredConfig {
  Index t0 = 1;
  Index target_t = 1;
  int rank = 1;
  StaggeredLink link = StaggeredLink::linear;
  std::uint64_t seed = 1;
  double lambda_bar = 0.05;
};

/// Per-unit nuisance estimates at target_t.
struct StaggeredEstimates {
  std::vector<double> p_hat;
  std::vector<double> theta0_hat;
  std::vector<double> theta1_hat;
};

/// The seeded unit split used by cross_fitted_regression: each arm's units
/// at target_t are shuffled and divided into halves of sizes ceil and
/// floor; half s pools both arms.
struct StaggeredSplit {
  std::vector<Index> by_arm_half[2][2];  // [arm][half], sorted
  std::vector<Index> halves[2];          // union over arms, sorted
};

StaggeredSplit staggered_split(const DenseMatrix& a,
                               const StaggeredConfig& cfg);

/// Least-squares fit of v in g(u, v) = 1 - (1 - u)^v by 1-d Gauss-Newton
/// with backtracking. Used for the geometric propensity link.
double fit_geometric_link(const Eigen::VectorXd& u, const Eigen::VectorXd& b);

/// Cross-fitted regression for staggered adoption: shared unit factors from
/// the SVD of the pre-period outcomes (factor scores U * Sigma), per-half
/// time factors fit on the complementary half, linked by `link` for the
/// propensity and linearly for the outcomes. Estimates for a unit never
/// read that unit's half at target_t.
StaggeredEstimates cross_fitted_regression(const DenseMatrix& y,
                                           const DenseMatrix& a,
                                           const StaggeredConfig& cfg);

}  // namespace drlfm
