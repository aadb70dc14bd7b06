#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drlfm/estimators.hpp"
#include "drlfm/rng.hpp"

namespace drlfm {

/// Monte-Carlo study configuration. Latent factors are uniform on
/// [sqrt(lambda), sqrt(1-lambda)); the unit factors are shared between the
/// propensity and outcome models, which is what makes the confounding
/// unobserved. c0/c1 scale the two mean-outcome matrices.
struct SimConfig {
  Index n = 100;
  Index m = 100;
  int r_p = 1;
  int r_theta = 1;
  double lambda = 0.05;
  double c0 = 1.0;
  double c1 = 2.0;
  int reps = 100;
  std::uint64_t seed = 1;
  double lambda_bar = 0.05;
  double ci_level = 0.95;
  std::vector<Index> outcome_indices{0};
  Index hist_outcome = 0;  // outcome whose DR errors are binned
  int hist_bins = 40;

  void validate() const;  // collects every violation into one message
  static SimConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Ground truth plus the exact factor pairs it was built from, so tests can
/// check rank and subspace structure directly: p = u_p v_p^T and
/// theta_a = u_theta_a v_theta_a^T.
struct GroundTruthDraw {
  GroundTruth gt;
  DenseMatrix u_shared;  // n x max(r_p, r_theta)
  DenseMatrix u_p, v_p;
  DenseMatrix u_theta0, v_theta0;
  DenseMatrix u_theta1, v_theta1;
};

GroundTruthDraw generate_ground_truth(const SimConfig& cfg, Rng& rng);

/// One (Y, A) realization from the ground truth.
std::pair<DenseMatrix, DenseMatrix> sample_realization(const GroundTruth& gt,
                                                       Rng& rng);

struct RepRecord {
  int rep = 0;
  bool ok = false;
  std::string error;
  // Parallel arrays over SimConfig::outcome_indices.
  std::vector<double> err_oi, err_ipw, err_dr, sigma_hat;
  std::vector<bool> covered_hat, covered_bar;
};

struct OutcomeAggregate {
  Index j = 0;
  double bias_oi = 0, bias_ipw = 0, bias_dr = 0;
  double std_oi = 0, std_ipw = 0, std_dr = 0;
  double coverage_hat = 0, coverage_bar = 0;
};

struct HistogramBin {
  double low = 0, high = 0, density = 0;
};

struct SimReport {
  SimConfig cfg;
  std::vector<double> true_tau;        // per outcome index
  std::vector<double> true_sigma_bar;  // per outcome index
  std::vector<RepRecord> reps;
  std::vector<OutcomeAggregate> aggregates;
  std::vector<HistogramBin> histogram;  // DR errors at cfg.hist_outcome
  int failures = 0;
};

/// Ground truth is drawn once from the seed; replication k consumes a
/// stream that is a pure function of (seed, k), so the report is identical
/// for every thread count.
SimReport run_simulation(const SimConfig& cfg, int threads = 1);

void write_replications_csv(std::ostream& out, const SimReport& report);
void write_histogram_csv(std::ostream& out, const SimReport& report);
nlohmann::json aggregate_json(const SimReport& report);

}  // namespace drlfm
