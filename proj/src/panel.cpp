#include "drlfm/panel.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "drlfm/rng.hpp"
#include "drlfm/tall_wide.hpp"

namespace drlfm {

namespace {

constexpr double kAlphaCap = 0.99;

double lagged_value(const DenseMatrix& y, const std::vector<double>& y0,
                    Index i, Index t) {
  return t == 0 ? y0[static_cast<std::size_t>(i)] : y(i, t - 1);
}

void check_panel_inputs(const DenseMatrix& y, const DenseMatrix& a,
                        const std::vector<double>& y0) {
  require_same_shape(y.eigen(), a.eigen(), "panel");
  if (static_cast<Index>(y0.size()) != y.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "y0 has " + std::to_string(y0.size()) + " entries, expected " +
             std::to_string(y.rows()));
  }
  for (double v : y0) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::nonfinite_value, "y0 contains a non-finite value");
    }
  }
}

// Ordinary least squares of b on the rows of x.
Eigen::VectorXd ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& b) {
  return x.colPivHouseholderQr().solve(b);
}

double geometric_link(double u, double v) {
  const double base = std::clamp(1.0 - u, 1e-12, 1.0 - 1e-12);
  return 1.0 - std::pow(base, v);
}

}  // namespace

// Initialized from a log-linear transform of the means.
double fit_geometric_link(const Eigen::VectorXd& u, const Eigen::VectorXd& b) {
  const double mean_u = std::clamp(1.0 - u.mean(), 1e-12, 1.0 - 1e-12);
  const double mean_b = std::clamp(1.0 - b.mean(), 1e-12, 1.0 - 1e-12);
  double v = std::clamp(std::log(mean_b) / std::log(mean_u), 1e-6, 1e6);

  auto sse = [&](double vv) {
    double s = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
      const double r = b(i) - geometric_link(u(i), vv);
      s += r * r;
    }
    return s;
  };
  double cur = sse(v);
  for (int it = 0; it < 200; ++it) {
    double grad = 0.0;   // sum of residual * dg/dv
    double curv = 0.0;   // sum of (dg/dv)^2
    for (Index i = 0; i < u.size(); ++i) {
      const double base = std::clamp(1.0 - u(i), 1e-12, 1.0 - 1e-12);
      const double pw = std::pow(base, v);
      const double gv = -pw * std::log(base);
      const double r = b(i) - (1.0 - pw);
      grad += r * gv;
      curv += gv * gv;
    }
    if (std::fabs(grad) < 1e-12 || curv <= 0.0) break;
    double step = grad / curv;
    double trial = v + step;
    double trial_sse = sse(trial);
    int halvings = 0;
    while (trial_sse > cur && halvings < 40) {
      step *= 0.5;
      trial = v + step;
      trial_sse = sse(trial);
      ++halvings;
    }
    if (trial_sse > cur) break;
    v = trial;
    cur = trial_sse;
  }
  return v;
}

std::pair<MaskedMatrix, MaskedMatrix> residual_matrices(
    const DenseMatrix& y, const DenseMatrix& a, double alpha0, double alpha1,
    const std::vector<double>& y0) {
  check_panel_inputs(y, a, y0);
  require_binary(a, "treatment matrix");
  const Index n = y.rows();
  const Index t_len = y.cols();
  Eigen::MatrixXd r0 = Eigen::MatrixXd::Zero(n, t_len);
  Eigen::MatrixXd r1 = Eigen::MatrixXd::Zero(n, t_len);
  BoolArray m0(n, t_len), m1(n, t_len);
  for (Index t = 0; t < t_len; ++t) {
    for (Index i = 0; i < n; ++i) {
      const double lag = lagged_value(y, y0, i, t);
      const bool treated = a(i, t) == 1.0;
      m0(i, t) = !treated;
      m1(i, t) = treated;
      if (treated) {
        r1(i, t) = y(i, t) - alpha1 * lag;
      } else {
        r0(i, t) = y(i, t) - alpha0 * lag;
      }
    }
  }
  return {MaskedMatrix(DenseMatrix(std::move(r0)), std::move(m0)),
          MaskedMatrix(DenseMatrix(std::move(r1)), std::move(m1))};
}

double estimate_alpha(const DenseMatrix& y, const DenseMatrix& a, int arm) {
  require_same_shape(y.eigen(), a.eigen(), "estimate_alpha");
  require_binary(a, "treatment matrix");
  if (arm != 0 && arm != 1) {
    fail(ErrorCode::invalid_argument, "arm must be 0 or 1");
  }
  const double want = static_cast<double>(arm);
  // Per-time demeaning absorbs the time effects; the slope is pooled over
  // all qualifying cells.
  double sxy = 0.0;
  double sxx = 0.0;
  std::size_t cells = 0;
  for (Index t = 1; t < y.cols(); ++t) {
    std::vector<Index> rows;
    for (Index i = 0; i < y.rows(); ++i) {
      if (a(i, t) == want && a(i, t - 1) == want) rows.push_back(i);
    }
    if (rows.empty()) continue;
    cells += rows.size();
    double mx = 0.0, mz = 0.0;
    for (Index i : rows) {
      mx += y(i, t - 1);
      mz += y(i, t);
    }
    mx /= static_cast<double>(rows.size());
    mz /= static_cast<double>(rows.size());
    for (Index i : rows) {
      const double x = y(i, t - 1) - mx;
      const double z = y(i, t) - mz;
      sxy += x * z;
      sxx += x * x;
    }
  }
  if (cells < 2 || sxx <= 0.0) {
    fail(ErrorCode::insufficient_data,
         "need at least two qualifying cells with lagged variation to "
         "estimate alpha for arm " +
             std::to_string(arm));
  }
  return std::clamp(sxy / sxx, -kAlphaCap, kAlphaCap);
}

AteResult dr_lagged_estimate(const DenseMatrix& y, const DenseMatrix& a,
                             const NuisanceEstimates& est,
                             const LaggedConfig& cfg) {
  check_panel_inputs(y, a, cfg.y0);
  require_same_shape(y.eigen(), est.p_hat.eigen(), "dr_lagged_estimate");
  require_same_shape(y.eigen(), est.theta0_hat.eigen(), "dr_lagged_estimate");
  require_same_shape(y.eigen(), est.theta1_hat.eigen(), "dr_lagged_estimate");
  if (cfg.horizon_T < 1 || cfg.horizon_T > y.cols()) {
    fail(ErrorCode::invalid_argument,
         "horizon_T must lie in [1, " + std::to_string(y.cols()) + "]");
  }
  if (cfg.window_J < 1 || cfg.window_J > cfg.horizon_T) {
    fail(ErrorCode::invalid_argument,
         "window_J must lie in [1, horizon_T]");
  }
  if (std::fabs(cfg.alpha0_hat) >= 1.0 || std::fabs(cfg.alpha1_hat) >= 1.0) {
    fail(ErrorCode::invalid_argument,
         "auto-regressive estimates must have |alpha| < 1");
  }
  const Index n = y.rows();
  const Index horizon = cfg.horizon_T;
  double mu1 = 0.0;
  double mu0 = 0.0;
  for (Index i = 0; i < n; ++i) {
    double acc1 = std::pow(cfg.alpha1_hat, static_cast<double>(horizon)) *
                  cfg.y0[static_cast<std::size_t>(i)];
    double acc0 = std::pow(cfg.alpha0_hat, static_cast<double>(horizon)) *
                  cfg.y0[static_cast<std::size_t>(i)];
    for (int s = 0; s < cfg.window_J; ++s) {
      const Index t = horizon - 1 - s;
      const double p = est.p_hat(i, t);
      if (!(p > 0.0 && p < 1.0)) {
        fail(ErrorCode::division_by_zero,
             "propensity at (" + std::to_string(i) + "," + std::to_string(t) +
                 ") is " + std::to_string(p) +
                 "; must lie strictly in (0,1)");
      }
      const double yi = y(i, t);
      const double ai = a(i, t);
      const double lag = lagged_value(y, cfg.y0, i, t);
      const double t1 = est.theta1_hat(i, t);
      const double t0 = est.theta0_hat(i, t);
      const double r1 = yi - cfg.alpha1_hat * lag - t1;
      const double r0 = yi - cfg.alpha0_hat * lag - t0;
      const double dr1 = t1 + r1 * ai / p;
      const double dr0 = t0 + r0 * (1.0 - ai) / (1.0 - p);
      acc1 += std::pow(cfg.alpha1_hat, static_cast<double>(s)) * dr1;
      acc0 += std::pow(cfg.alpha0_hat, static_cast<double>(s)) * dr0;
    }
    mu1 += acc1;
    mu0 += acc0;
  }
  AteResult r;
  r.outcome_index = horizon - 1;
  r.estimator = Estimator::dr;
  r.n_units = n;
  r.estimate = mu1 / static_cast<double>(n) - mu0 / static_cast<double>(n);
  return r;
}

namespace {

void check_staggered_config(const DenseMatrix& y, const DenseMatrix& a,
                            const StaggeredConfig& cfg) {
  require_same_shape(y.eigen(), a.eigen(), "cross_fitted_regression");
  require_binary(a, "treatment matrix");
  const Index n = y.rows();
  const Index t_len = y.cols();
  if (cfg.t0 < 1 || cfg.t0 >= t_len) {
    fail(ErrorCode::invalid_argument,
         "t0 must lie in [1, T); T = " + std::to_string(t_len));
  }
  if (cfg.target_t < cfg.t0 || cfg.target_t >= t_len) {
    fail(ErrorCode::invalid_argument, "target_t must lie in [t0, T)");
  }
  if (cfg.rank < 1 || cfg.rank > std::min<Index>(n, cfg.t0)) {
    fail(ErrorCode::rank_infeasible, "rank must lie in [1, min(N, t0)]");
  }
  if (!(cfg.lambda_bar > 0.0 && cfg.lambda_bar <= 0.5)) {
    fail(ErrorCode::invalid_argument, "lambda_bar must lie in (0, 0.5]");
  }
  if (cfg.link == StaggeredLink::geometric && cfg.rank != 1) {
    fail(ErrorCode::invalid_argument, "geometric link supports rank 1 only");
  }
  for (Index i = 0; i < n; ++i) {
    bool seen_treated = false;
    for (Index t = 0; t < t_len; ++t) {
      const bool treated = a(i, t) == 1.0;
      if (treated && t < cfg.t0) {
        fail(ErrorCode::invalid_argument,
             "row " + std::to_string(i) +
                 " is treated inside the pre-period");
      }
      if (seen_treated && !treated) {
        fail(ErrorCode::invalid_argument,
             "row " + std::to_string(i) +
                 " reverts to control; pattern is not staggered");
      }
      seen_treated = seen_treated || treated;
    }
  }
}

}  // namespace

StaggeredSplit staggered_split(const DenseMatrix& a,
                               const StaggeredConfig& cfg) {
  std::vector<Index> arm_units[2];
  for (Index i = 0; i < a.rows(); ++i) {
    arm_units[a(i, cfg.target_t) == 1.0 ? 1 : 0].push_back(i);
  }
  StaggeredSplit split;
  for (int arm = 0; arm < 2; ++arm) {
    if (arm_units[arm].empty()) {
      fail(ErrorCode::degenerate_split,
           "arm " + std::to_string(arm) + " has no units at target_t");
    }
    auto order = arm_units[arm];
    Rng rng(cfg.seed, 0x73706C69ULL + static_cast<std::uint64_t>(arm));
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
      std::swap(order[i], order[j]);
    }
    const std::size_t first = (order.size() + 1) / 2;
    split.by_arm_half[arm][0].assign(order.begin(),
                                     order.begin() + static_cast<long>(first));
    split.by_arm_half[arm][1].assign(order.begin() + static_cast<long>(first),
                                     order.end());
    for (int s = 0; s < 2; ++s) {
      if (split.by_arm_half[arm][s].empty()) {
        fail(ErrorCode::degenerate_split,
             "arm " + std::to_string(arm) + " is empty in half " +
                 std::to_string(s));
      }
      std::sort(split.by_arm_half[arm][s].begin(),
                split.by_arm_half[arm][s].end());
    }
  }
  for (int s = 0; s < 2; ++s) {
    split.halves[s] = split.by_arm_half[0][s];
    split.halves[s].insert(split.halves[s].end(),
                           split.by_arm_half[1][s].begin(),
                           split.by_arm_half[1][s].end());
    std::sort(split.halves[s].begin(), split.halves[s].end());
  }
  return split;
}

StaggeredEstimates cross_fitted_regression(const DenseMatrix& y,
                                           const DenseMatrix& a,
                                           const StaggeredConfig& cfg) {
  check_staggered_config(y, a, cfg);
  const Index n = y.rows();

  // Shared unit factors from the pre-period: factor scores U_r * Sigma_r,
  // with the same sign convention as the completion kernel. For the
  // nonlinear link the scores are calibrated by the scale of the pre-period
  // time factors, which the model fixes.
  const auto pre = tw_detail::svd_parts(y.eigen().leftCols(cfg.t0));
  const Eigen::MatrixXd u_hat = pre.u.leftCols(cfg.rank) *
                                pre.sigma.head(cfg.rank).asDiagonal();

  const StaggeredSplit split = staggered_split(a, cfg);
  const auto& halves = split.halves;
  const auto& half_units = split.by_arm_half;

  auto gather_rows = [&](const std::vector<Index>& units) {
    Eigen::MatrixXd x(static_cast<Index>(units.size()), cfg.rank);
    for (std::size_t k = 0; k < units.size(); ++k) {
      x.row(static_cast<Index>(k)) = u_hat.row(units[k]);
    }
    return x;
  };
  auto gather_col = [&](const std::vector<Index>& units,
                        const DenseMatrix& src) {
    Eigen::VectorXd b(static_cast<Index>(units.size()));
    for (std::size_t k = 0; k < units.size(); ++k) {
      b(static_cast<Index>(k)) = src(units[k], cfg.target_t);
    }
    return b;
  };

  // Time factor for half s is fit on the complementary half, so estimates
  // for a unit never read its own half's data at target_t.
  Eigen::VectorXd v_p[2];
  for (int s = 0; s < 2; ++s) {
    const auto& fit_units = halves[1 - s];
    const Eigen::MatrixXd x = gather_rows(fit_units);
    const Eigen::VectorXd b = gather_col(fit_units, a);
    if (cfg.link == StaggeredLink::linear) {
      v_p[s] = ols(x, b);
    } else {
      v_p[s] = Eigen::VectorXd::Constant(1, fit_geometric_link(x.col(0), b));
    }
  }
  Eigen::VectorXd v_theta[2][2];  // [arm][half]
  for (int arm = 0; arm < 2; ++arm) {
    for (int s = 0; s < 2; ++s) {
      const auto& fit_units = half_units[arm][1 - s];
      v_theta[arm][s] =
          ols(gather_rows(fit_units), gather_col(fit_units, y));
    }
  }

  StaggeredEstimates out;
  out.p_hat.assign(static_cast<std::size_t>(n), 0.0);
  out.theta0_hat.assign(static_cast<std::size_t>(n), 0.0);
  out.theta1_hat.assign(static_cast<std::size_t>(n), 0.0);
  for (int s = 0; s < 2; ++s) {
    for (Index i : halves[s]) {
      double p;
      if (cfg.link == StaggeredLink::linear) {
        p = u_hat.row(i).dot(v_p[s]);
      } else {
        p = geometric_link(u_hat(i, 0), v_p[s](0));
      }
      out.p_hat[static_cast<std::size_t>(i)] =
          std::clamp(p, cfg.lambda_bar, 1.0 - cfg.lambda_bar);
      out.theta0_hat[static_cast<std::size_t>(i)] =
          u_hat.row(i).dot(v_theta[0][s]);
      out.theta1_hat[static_cast<std::size_t>(i)] =
          u_hat.row(i).dot(v_theta[1][s]);
    }
  }
  return out;
}

}  // namespace drlfm
