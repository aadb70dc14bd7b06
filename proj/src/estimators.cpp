#include "drlfm/estimators.hpp"

#include <cmath>

namespace drlfm {

namespace {

void check_column(Index j, Index cols) {
  if (j < 0 || j >= cols) {
    fail(ErrorCode::invalid_argument,
         "outcome index " + std::to_string(j) + " out of range [0, " +
             std::to_string(cols) + ")");
  }
}

void check_open_unit(double p, Index i, Index j) {
  if (!(p > 0.0 && p < 1.0)) {
    fail(ErrorCode::division_by_zero,
         "propensity at (" + std::to_string(i) + "," + std::to_string(j) +
             ") is " + std::to_string(p) + "; must lie strictly in (0,1)");
  }
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    fail(ErrorCode::invalid_argument,
         "confidence level must lie in (0,1), got " + std::to_string(level));
  }
}

}  // namespace

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::oi:
      return "oi";
    case Estimator::ipw:
      return "ipw";
    case Estimator::dr:
      return "dr";
  }
  return "?";
}

double true_ate(const GroundTruth& gt, Index j) {
  check_column(j, gt.theta0.cols());
  return gt.theta1.eigen().col(j).mean() - gt.theta0.eigen().col(j).mean();
}

AteResult oi_estimate(const NuisanceEstimates& est, Index j) {
  check_column(j, est.theta0_hat.cols());
  AteResult r;
  r.outcome_index = j;
  r.estimator = Estimator::oi;
  r.n_units = est.theta0_hat.rows();
  r.estimate = est.theta1_hat.eigen().col(j).mean() -
               est.theta0_hat.eigen().col(j).mean();
  return r;
}

AteResult ipw_estimate(const DenseMatrix& y, const DenseMatrix& a,
                       const DenseMatrix& p_hat, Index j) {
  require_same_shape(y.eigen(), a.eigen(), "ipw_estimate");
  require_same_shape(y.eigen(), p_hat.eigen(), "ipw_estimate");
  check_column(j, y.cols());
  const Index n = y.rows();
  double mu1 = 0.0;
  double mu0 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = p_hat(i, j);
    check_open_unit(p, i, j);
    mu1 += y(i, j) * a(i, j) / p;
    mu0 += y(i, j) * (1.0 - a(i, j)) / (1.0 - p);
  }
  AteResult r;
  r.outcome_index = j;
  r.estimator = Estimator::ipw;
  r.n_units = n;
  r.estimate = mu1 / static_cast<double>(n) - mu0 / static_cast<double>(n);
  return r;
}

AteResult dr_estimate(const DenseMatrix& y, const DenseMatrix& a,
                      const NuisanceEstimates& est, Index j, double level) {
  require_same_shape(y.eigen(), a.eigen(), "dr_estimate");
  require_same_shape(y.eigen(), est.p_hat.eigen(), "dr_estimate");
  require_same_shape(y.eigen(), est.theta0_hat.eigen(), "dr_estimate");
  require_same_shape(y.eigen(), est.theta1_hat.eigen(), "dr_estimate");
  check_column(j, y.cols());
  check_level(level);
  const Index n = y.rows();
  double mu1 = 0.0;
  double mu0 = 0.0;
  double var = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = est.p_hat(i, j);
    check_open_unit(p, i, j);
    const double yi = y(i, j);
    const double ai = a(i, j);
    const double t1 = est.theta1_hat(i, j);
    const double t0 = est.theta0_hat(i, j);
    const double r1 = yi - t1;
    const double r0 = yi - t0;
    mu1 += t1 + r1 * ai / p;
    mu0 += t0 + r0 * (1.0 - ai) / (1.0 - p);
    var += r1 * r1 * ai / (p * p) + r0 * r0 * (1.0 - ai) / ((1.0 - p) * (1.0 - p));
  }
  AteResult r;
  r.outcome_index = j;
  r.estimator = Estimator::dr;
  r.n_units = n;
  r.estimate = mu1 / static_cast<double>(n) - mu0 / static_cast<double>(n);
  const double sigma_hat = std::sqrt(var / static_cast<double>(n));
  const double se = sigma_hat / std::sqrt(static_cast<double>(n));
  const double z = normal_quantile(0.5 + level / 2.0);
  r.std_error = se;
  r.ci_low = r.estimate - z * se;
  r.ci_high = r.estimate + z * se;
  return r;
}

std::vector<AteResult> estimate_all(const DenseMatrix& y,
                                    const DenseMatrix& a,
                                    const NuisanceEstimates& est,
                                    double level) {
  check_level(level);
  std::vector<AteResult> out;
  out.reserve(static_cast<std::size_t>(3 * y.cols()));
  for (Index j = 0; j < y.cols(); ++j) {
    out.push_back(oi_estimate(est, j));
    out.push_back(ipw_estimate(y, a, est.p_hat, j));
    out.push_back(dr_estimate(y, a, est, j, level));
  }
  return out;
}

double true_asymptotic_variance(const GroundTruth& gt, Index j) {
  check_column(j, gt.p.cols());
  const Index n = gt.p.rows();
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double p = gt.p(i, j);
    check_open_unit(p, i, j);
    const double s1 = gt.sigma1(i, j);
    const double s0 = gt.sigma0(i, j);
    acc += s1 * s1 / p + s0 * s0 / (1.0 - p);
  }
  return acc / static_cast<double>(n);
}

}  // namespace drlfm
