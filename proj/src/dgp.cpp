#include "drlfm/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <nlohmann/json.hpp>

#include "drlfm/csv.hpp"
#include "drlfm/parallel.hpp"
#include "drlfm/tall_wide.hpp"

namespace drlfm {

namespace {

constexpr std::uint64_t kGroundTruthStream = 1ULL << 63;

}  // namespace

void SimConfig::validate() const {
  std::vector<std::string> problems;
  if (n < 2 || m < 2) problems.push_back("n and m must be at least 2");
  if (r_p < 1 || r_theta < 1) problems.push_back("ranks must be positive");
  if (std::max(r_p, r_theta) > std::min(n, m)) {
    problems.push_back("max(r_p, r_theta) exceeds min(n, m)");
  }
  if (!(lambda > 0.0 && lambda <= 0.5)) {
    problems.push_back("lambda must lie in (0, 0.5]");
  }
  if (!(lambda_bar > 0.0 && lambda_bar <= lambda)) {
    problems.push_back("lambda_bar must lie in (0, lambda]");
  }
  if (c0 <= 0.0 || c1 <= 0.0) problems.push_back("c0 and c1 must be positive");
  if (reps < 1) problems.push_back("reps must be at least 1");
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    problems.push_back("ci_level must lie in (0, 1)");
  }
  if (outcome_indices.empty()) {
    problems.push_back("outcome_indices must not be empty");
  }
  for (Index j : outcome_indices) {
    if (j < 0 || j >= m) {
      problems.push_back("outcome index " + std::to_string(j) +
                         " out of range [0, " + std::to_string(m) + ")");
      break;
    }
  }
  if (std::find(outcome_indices.begin(), outcome_indices.end(),
                hist_outcome) == outcome_indices.end()) {
    problems.push_back("hist_outcome must be listed in outcome_indices");
  }
  if (hist_bins < 1) problems.push_back("hist_bins must be positive");
  if (!problems.empty()) {
    std::string msg = "invalid simulation config:";
    for (const auto& p : problems) msg += "\n  - " + p;
    fail(ErrorCode::invalid_argument, msg);
  }
}

SimConfig SimConfig::from_json(const nlohmann::json& j) {
  static const char* known[] = {
      "n",          "m",       "r_p",          "r_theta",
      "lambda",     "c0",      "c1",           "reps",
      "seed",       "lambda_bar", "ci_level",  "outcome_indices",
      "hist_outcome", "hist_bins"};
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool found = false;
    for (const char* k : known) {
      if (it.key() == k) {
        found = true;
        break;
      }
    }
    if (!found) unknown.push_back(it.key());
  }
  if (!unknown.empty()) {
    std::string msg = "unknown simulation config fields:";
    for (const auto& k : unknown) msg += " " + k;
    fail(ErrorCode::invalid_argument, msg);
  }
  SimConfig cfg;
  cfg.n = j.value("n", cfg.n);
  cfg.m = j.value("m", cfg.m);
  cfg.r_p = j.value("r_p", cfg.r_p);
  cfg.r_theta = j.value("r_theta", cfg.r_theta);
  cfg.lambda = j.value("lambda", cfg.lambda);
  cfg.c0 = j.value("c0", cfg.c0);
  cfg.c1 = j.value("c1", cfg.c1);
  cfg.reps = j.value("reps", cfg.reps);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.lambda_bar = j.value("lambda_bar", cfg.lambda_bar);
  cfg.ci_level = j.value("ci_level", cfg.ci_level);
  if (j.contains("outcome_indices")) {
    cfg.outcome_indices = j.at("outcome_indices").get<std::vector<Index>>();
  }
  cfg.hist_outcome = j.value("hist_outcome", cfg.hist_outcome);
  cfg.hist_bins = j.value("hist_bins", cfg.hist_bins);
  return cfg;
}

nlohmann::json SimConfig::to_json() const {
  return nlohmann::json{{"n", n},
                        {"m", m},
                        {"r_p", r_p},
                        {"r_theta", r_theta},
                        {"lambda", lambda},
                        {"c0", c0},
                        {"c1", c1},
                        {"reps", reps},
                        {"seed", seed},
                        {"lambda_bar", lambda_bar},
                        {"ci_level", ci_level},
                        {"outcome_indices", outcome_indices},
                        {"hist_outcome", hist_outcome},
                        {"hist_bins", hist_bins}};
}

GroundTruthDraw generate_ground_truth(const SimConfig& cfg, Rng& rng) {
  cfg.validate();
  const Index n = cfg.n;
  const Index m = cfg.m;
  const int r = std::max(cfg.r_p, cfg.r_theta);
  const double lo = std::sqrt(cfg.lambda);
  const double hi = std::sqrt(1.0 - cfg.lambda);

  auto draw_uniform = [&](Index rows, Index cols) {
    Eigen::MatrixXd out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
      for (Index i = 0; i < rows; ++i) {
        out(i, j) = rng.uniform(lo, hi);
      }
    }
    return out;
  };

  const Eigen::MatrixXd u_shared = draw_uniform(n, r);
  const Eigen::MatrixXd v = draw_uniform(m, r);
  const Eigen::MatrixXd v0 = draw_uniform(m, r);
  const Eigen::MatrixXd v1 = draw_uniform(m, r);

  const Eigen::MatrixXd u_p = u_shared.leftCols(cfg.r_p) / cfg.r_p;
  const Eigen::MatrixXd v_p = v.leftCols(cfg.r_p);
  const Eigen::MatrixXd p = u_p * v_p.transpose();

  auto build_theta = [&](const Eigen::MatrixXd& v_a, double c_a) {
    const auto parts = tw_detail::svd_parts(u_shared * v_a.transpose());
    const double scale = c_a * parts.sigma.sum() / cfg.r_theta;
    Eigen::MatrixXd u_fac = scale * parts.u.leftCols(cfg.r_theta);
    Eigen::MatrixXd v_fac = parts.v.leftCols(cfg.r_theta);
    Eigen::MatrixXd theta = u_fac * v_fac.transpose();
    return std::make_tuple(std::move(theta), std::move(u_fac),
                           std::move(v_fac));
  };
  auto [theta0, u_t0, v_t0] = build_theta(v0, cfg.c0);
  auto [theta1, u_t1, v_t1] = build_theta(v1, cfg.c1);

  auto entry_sd = [](const Eigen::MatrixXd& t) {
    const double mean = t.mean();
    return std::sqrt((t.array() - mean).square().mean());
  };

  GroundTruth gt{DenseMatrix(theta0), DenseMatrix(theta1), DenseMatrix(p),
                 DenseMatrix(n, m, entry_sd(theta0)),
                 DenseMatrix(n, m, entry_sd(theta1))};
  return GroundTruthDraw{std::move(gt),
                         DenseMatrix(u_shared),
                         DenseMatrix(u_p),
                         DenseMatrix(v_p),
                         DenseMatrix(u_t0),
                         DenseMatrix(v_t0),
                         DenseMatrix(u_t1),
                         DenseMatrix(v_t1)};
}

std::pair<DenseMatrix, DenseMatrix> sample_realization(const GroundTruth& gt,
                                                       Rng& rng) {
  const Index n = gt.p.rows();
  const Index m = gt.p.cols();
  Eigen::MatrixXd y0(n, m), y1(n, m), a(n, m);
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      y0(i, j) = gt.theta0(i, j) + gt.sigma0(i, j) * rng.normal();
    }
  }
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      y1(i, j) = gt.theta1(i, j) + gt.sigma1(i, j) * rng.normal();
    }
  }
  for (Index j = 0; j < m; ++j) {
    for (Index i = 0; i < n; ++i) {
      a(i, j) = rng.bernoulli(gt.p(i, j)) ? 1.0 : 0.0;
    }
  }
  Eigen::MatrixXd y =
      (y0.array() * (1.0 - a.array()) + y1.array() * a.array()).matrix();
  return {DenseMatrix(std::move(y)), DenseMatrix(std::move(a))};
}

SimReport run_simulation(const SimConfig& cfg, int threads) {
  cfg.validate();
  Rng gt_rng(cfg.seed, kGroundTruthStream);
  const GroundTruthDraw draw = generate_ground_truth(cfg, gt_rng);
  const GroundTruth& gt = draw.gt;

  SimReport report;
  report.cfg = cfg;
  const std::size_t nj = cfg.outcome_indices.size();
  for (Index j : cfg.outcome_indices) {
    report.true_tau.push_back(true_ate(gt, j));
    report.true_sigma_bar.push_back(
        std::sqrt(true_asymptotic_variance(gt, j)));
  }

  const BlockPartition partition = default_partition(cfg.n, cfg.m);
  const CfsvdConfig nuisance_cfg = CfsvdConfig::from_model_ranks(
      cfg.r_p, cfg.r_theta, cfg.r_theta, cfg.lambda_bar);
  const double z = normal_quantile(0.5 + cfg.ci_level / 2.0);
  const double sqrt_n = std::sqrt(static_cast<double>(cfg.n));

  report.reps.resize(static_cast<std::size_t>(cfg.reps));
  parallel_for(
      static_cast<std::size_t>(cfg.reps), threads, [&](std::size_t k) {
        RepRecord& rec = report.reps[k];
        rec.rep = static_cast<int>(k);
        Rng rng(cfg.seed, static_cast<std::uint64_t>(k));
        try {
          auto [y, a] = sample_realization(gt, rng);
          const NuisanceEstimates est =
              cfsvd(y, a, partition, nuisance_cfg);
          rec.err_oi.reserve(nj);
          for (std::size_t q = 0; q < nj; ++q) {
            const Index j = cfg.outcome_indices[q];
            const double tau = report.true_tau[q];
            const AteResult oi = oi_estimate(est, j);
            const AteResult ipw = ipw_estimate(y, a, est.p_hat, j);
            const AteResult dr =
                dr_estimate(y, a, est, j, cfg.ci_level);
            rec.err_oi.push_back(oi.estimate - tau);
            rec.err_ipw.push_back(ipw.estimate - tau);
            rec.err_dr.push_back(dr.estimate - tau);
            const double sigma_hat = *dr.std_error * sqrt_n;
            rec.sigma_hat.push_back(sigma_hat);
            rec.covered_hat.push_back(*dr.ci_low <= tau &&
                                      tau <= *dr.ci_high);
            const double half = z * report.true_sigma_bar[q] / sqrt_n;
            rec.covered_bar.push_back(
                std::fabs(dr.estimate - tau) <= half);
          }
          rec.ok = true;
        } catch (const Error& e) {
          rec.ok = false;
          rec.error = e.what();
        }
      });

  for (const auto& rec : report.reps) {
    if (!rec.ok) ++report.failures;
  }

  // Aggregates over successful replications.
  for (std::size_t q = 0; q < nj; ++q) {
    OutcomeAggregate agg;
    agg.j = cfg.outcome_indices[q];
    std::vector<double> eo, ei, ed;
    int cov_hat = 0, cov_bar = 0, total = 0;
    for (const auto& rec : report.reps) {
      if (!rec.ok) continue;
      eo.push_back(rec.err_oi[q]);
      ei.push_back(rec.err_ipw[q]);
      ed.push_back(rec.err_dr[q]);
      cov_hat += rec.covered_hat[q] ? 1 : 0;
      cov_bar += rec.covered_bar[q] ? 1 : 0;
      ++total;
    }
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    auto sdev = [&](const std::vector<double>& v) {
      if (v.size() < 2) return 0.0;
      const double mu = mean(v);
      double s = 0;
      for (double x : v) s += (x - mu) * (x - mu);
      return std::sqrt(s / static_cast<double>(v.size() - 1));
    };
    agg.bias_oi = mean(eo);
    agg.bias_ipw = mean(ei);
    agg.bias_dr = mean(ed);
    agg.std_oi = sdev(eo);
    agg.std_ipw = sdev(ei);
    agg.std_dr = sdev(ed);
    agg.coverage_hat = total > 0 ? static_cast<double>(cov_hat) / total : 0.0;
    agg.coverage_bar = total > 0 ? static_cast<double>(cov_bar) / total : 0.0;
    report.aggregates.push_back(agg);
  }

  // Histogram of DR errors for the designated outcome, area-normalized.
  const std::size_t hist_q = static_cast<std::size_t>(
      std::find(cfg.outcome_indices.begin(), cfg.outcome_indices.end(),
                cfg.hist_outcome) -
      cfg.outcome_indices.begin());
  std::vector<double> errs;
  for (const auto& rec : report.reps) {
    if (rec.ok) errs.push_back(rec.err_dr[hist_q]);
  }
  if (!errs.empty()) {
    const double lo = *std::min_element(errs.begin(), errs.end());
    const double hi = *std::max_element(errs.begin(), errs.end());
    const double width = std::max((hi - lo) / cfg.hist_bins, 1e-12);
    std::vector<int> counts(static_cast<std::size_t>(cfg.hist_bins), 0);
    for (double e : errs) {
      auto b = static_cast<std::size_t>(
          std::min<double>(std::floor((e - lo) / width),
                           cfg.hist_bins - 1));
      ++counts[b];
    }
    for (int b = 0; b < cfg.hist_bins; ++b) {
      HistogramBin bin;
      bin.low = lo + b * width;
      bin.high = lo + (b + 1) * width;
      bin.density = counts[static_cast<std::size_t>(b)] /
                    (static_cast<double>(errs.size()) * width);
      report.histogram.push_back(bin);
    }
  }
  return report;
}

void write_replications_csv(std::ostream& out, const SimReport& report) {
  out << "rep,j,err_oi,err_ipw,err_dr,sigma_hat,covered_hat,covered_bar\n";
  for (const auto& rec : report.reps) {
    if (!rec.ok) continue;
    for (std::size_t q = 0; q < report.cfg.outcome_indices.size(); ++q) {
      out << rec.rep << ',' << report.cfg.outcome_indices[q] << ','
          << format_double(rec.err_oi[q]) << ','
          << format_double(rec.err_ipw[q]) << ','
          << format_double(rec.err_dr[q]) << ','
          << format_double(rec.sigma_hat[q]) << ','
          << (rec.covered_hat[q] ? 1 : 0) << ','
          << (rec.covered_bar[q] ? 1 : 0) << '\n';
    }
  }
}

void write_histogram_csv(std::ostream& out, const SimReport& report) {
  out << "bin_low,bin_high,density\n";
  for (const auto& bin : report.histogram) {
    out << format_double(bin.low) << ',' << format_double(bin.high) << ','
        << format_double(bin.density) << '\n';
  }
}

nlohmann::json aggregate_json(const SimReport& report) {
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& a : report.aggregates) {
    aggs.push_back({{"j", a.j},
                    {"bias_oi", a.bias_oi},
                    {"bias_ipw", a.bias_ipw},
                    {"bias_dr", a.bias_dr},
                    {"std_oi", a.std_oi},
                    {"std_ipw", a.std_ipw},
                    {"std_dr", a.std_dr},
                    {"coverage_hat", a.coverage_hat},
                    {"coverage_bar", a.coverage_bar}});
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& rec : report.reps) {
    if (!rec.ok) {
      failures.push_back({{"rep", rec.rep}, {"error", rec.error}});
    }
  }
  return nlohmann::json{{"config", report.cfg.to_json()},
                        {"true_tau", report.true_tau},
                        {"true_sigma_bar", report.true_sigma_bar},
                        {"outcomes", aggs},
                        {"failures", failures},
                        {"failure_count", report.failures}};
}

}  // namespace drlfm
