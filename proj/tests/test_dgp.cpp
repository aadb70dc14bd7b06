#include <doctest.h>

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <nlohmann/json.hpp>
#include <sstream>

#include "drlfm/dgp.hpp"

using namespace drlfm;

namespace {

// Largest principal angle between the column spaces of two matrices.
double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qa(a), qb(b);
  const Eigen::MatrixXd qa_thin =
      qa.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd qb_thin =
      qb.householderQ() * Eigen::MatrixXd::Identity(b.rows(), b.cols());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(qa_thin.transpose() * qb_thin);
  const double c =
      std::min(1.0, svd.singularValues().minCoeff());
  return std::acos(c);
}

SimConfig small_config() {
  SimConfig cfg;
  cfg.n = 24;
  cfg.m = 20;
  cfg.r_p = 2;
  cfg.r_theta = 2;
  cfg.seed = 3;
  cfg.reps = 2;
  return cfg;
}

}  // namespace

TEST_CASE("ground truth satisfies the structural invariants") {
  const SimConfig cfg = small_config();
  Rng rng(cfg.seed, 0);
  const auto draw = generate_ground_truth(cfg, rng);
  const auto& gt = draw.gt;

  // P entries in [lambda, 1 - lambda].
  CHECK(gt.p.eigen().minCoeff() >= cfg.lambda);
  CHECK(gt.p.eigen().maxCoeff() <= 1.0 - cfg.lambda);

  // Theta has numerical rank r_theta.
  for (const DenseMatrix* theta : {&gt.theta0, &gt.theta1}) {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(theta->eigen());
    CHECK(svd.singularValues()(cfg.r_theta) <
          1e-8 * svd.singularValues()(0));
    CHECK(svd.singularValues()(cfg.r_theta - 1) >
          1e-8 * svd.singularValues()(0));
  }

  // Noise scale equals the entry standard deviation of theta, per arm.
  const auto sd = [](const Eigen::MatrixXd& t) {
    return std::sqrt((t.array() - t.mean()).square().mean());
  };
  CHECK(gt.sigma0(0, 0) == doctest::Approx(sd(gt.theta0.eigen())));
  CHECK(gt.sigma1(3, 4) == doctest::Approx(sd(gt.theta1.eigen())));
  CHECK((gt.sigma0.eigen().array() == gt.sigma0(0, 0)).all());

  // Factor pairs reproduce the matrices.
  CHECK((draw.u_p.eigen() * draw.v_p.eigen().transpose() - gt.p.eigen())
            .cwiseAbs()
            .maxCoeff() < 1e-12);
  CHECK((draw.u_theta1.eigen() * draw.v_theta1.eigen().transpose() -
         gt.theta1.eigen())
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("reference settings generate a valid draw") {
  SimConfig cfg;
  cfg.n = 30;
  cfg.m = 30;
  cfg.r_p = 3;
  cfg.r_theta = 3;
  cfg.lambda = 0.05;
  cfg.c0 = 1.0;
  cfg.c1 = 2.0;
  Rng rng(1, 0);
  const auto draw = generate_ground_truth(cfg, rng);
  CHECK(draw.gt.p.eigen().minCoeff() >= 0.05);
  CHECK(draw.gt.p.eigen().maxCoeff() <= 0.95);
}

TEST_CASE("unit factors are shared between propensity and outcomes") {
  const SimConfig cfg = small_config();
  Rng rng(9, 0);
  const auto draw = generate_ground_truth(cfg, rng);
  // Column spaces of P and Theta_a lie inside the span of the shared
  // factors.
  CHECK(max_principal_angle(draw.gt.p.eigen(),
                            draw.u_shared.eigen().leftCols(cfg.r_p)) < 1e-6);
  CHECK(max_principal_angle(draw.gt.theta0.eigen(), draw.u_shared.eigen()) <
        1e-6);
  CHECK(max_principal_angle(draw.gt.theta1.eigen(), draw.u_shared.eigen()) <
        1e-6);
}

TEST_CASE("rank feasibility is enforced") {
  SimConfig cfg = small_config();
  cfg.r_p = 30;  // exceeds min(n, m)
  Rng rng(1, 0);
  CHECK_THROWS_AS(generate_ground_truth(cfg, rng), Error);
}

TEST_CASE("sample_realization degenerate cases") {
  const Index n = 6, m = 5;
  const GroundTruth gt{DenseMatrix(n, m, -1.0), DenseMatrix(n, m, 2.0),
                       DenseMatrix(n, m, 1.0), DenseMatrix(n, m, 0.0),
                       DenseMatrix(n, m, 0.0)};
  Rng rng(4, 0);
  auto [y, a] = sample_realization(gt, rng);
  CHECK((a.eigen().array() == 1.0).all());
  CHECK((y.eigen().array() == 2.0).all());
}

TEST_CASE("bernoulli draws match their mean") {
  const Index n = 100, m = 100;
  const GroundTruth gt{DenseMatrix(n, m, 0.0), DenseMatrix(n, m, 0.0),
                       DenseMatrix(n, m, 0.3), DenseMatrix(n, m, 0.0),
                       DenseMatrix(n, m, 0.0)};
  Rng rng(8, 0);
  auto [y, a] = sample_realization(gt, rng);
  const double mean = a.eigen().mean();
  CHECK(mean > 0.285);
  CHECK(mean < 0.315);
}

TEST_CASE("fixed seed reproduces realizations bit for bit") {
  const SimConfig cfg = small_config();
  Rng gt_rng(cfg.seed, 7);
  const auto draw = generate_ground_truth(cfg, gt_rng);
  Rng r1(cfg.seed, 12), r2(cfg.seed, 12);
  auto [y1, a1] = sample_realization(draw.gt, r1);
  auto [y2, a2] = sample_realization(draw.gt, r2);
  CHECK((y1.eigen().array() == y2.eigen().array()).all());
  CHECK((a1.eigen().array() == a2.eigen().array()).all());
}

TEST_CASE("run_simulation smoke report") {
  SimConfig cfg;
  cfg.n = cfg.m = 16;
  cfg.r_p = cfg.r_theta = 1;
  cfg.reps = 1;
  cfg.seed = 2;
  const SimReport report = run_simulation(cfg, 1);
  CHECK(report.failures == 0);
  REQUIRE(report.reps.size() == 1);
  CHECK(report.reps[0].err_oi.size() == 1);
  CHECK(report.reps[0].err_ipw.size() == 1);
  CHECK(report.reps[0].err_dr.size() == 1);
  CHECK(report.aggregates.size() == 1);
  CHECK(report.true_sigma_bar[0] > 0.0);
}

TEST_CASE("report is identical for any thread count") {
  SimConfig cfg;
  cfg.n = cfg.m = 20;
  cfg.r_p = cfg.r_theta = 1;
  cfg.reps = 6;
  cfg.seed = 5;
  cfg.outcome_indices = {0, 3};
  cfg.hist_outcome = 3;
  const SimReport serial = run_simulation(cfg, 1);
  const SimReport parallel = run_simulation(cfg, 4);
  std::ostringstream s1, s2;
  write_replications_csv(s1, serial);
  write_replications_csv(s2, parallel);
  CHECK(s1.str() == s2.str());
  std::ostringstream h1, h2;
  write_histogram_csv(h1, serial);
  write_histogram_csv(h2, parallel);
  CHECK(h1.str() == h2.str());
  CHECK(aggregate_json(serial) == aggregate_json(parallel));
}

TEST_CASE("per-replication failures are recorded, not dropped") {
  SimConfig cfg;
  cfg.n = cfg.m = 4;
  cfg.r_p = 2;  // rank_y0bar = 3 exceeds the 2x2 block capacity
  cfg.r_theta = 1;
  cfg.reps = 3;
  const SimReport report = run_simulation(cfg, 1);
  CHECK(report.failures == 3);
  for (const auto& rec : report.reps) {
    CHECK(!rec.ok);
    CHECK(!rec.error.empty());
  }
  const auto j = aggregate_json(report);
  CHECK(j.at("failure_count").get<int>() == 3);
  CHECK(j.at("failures").size() == 3);
}

TEST_CASE("histogram integrates to one") {
  SimConfig cfg;
  cfg.n = cfg.m = 16;
  cfg.r_p = cfg.r_theta = 1;
  cfg.reps = 40;
  cfg.seed = 9;
  cfg.hist_bins = 8;
  const SimReport report = run_simulation(cfg, 1);
  double area = 0.0;
  for (const auto& bin : report.histogram) {
    area += bin.density * (bin.high - bin.low);
  }
  CHECK(area == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("config JSON round trip and validation") {
  SimConfig cfg = small_config();
  cfg.outcome_indices = {0, 1, 2};
  cfg.hist_outcome = 1;
  const auto j = cfg.to_json();
  const SimConfig back = SimConfig::from_json(j);
  CHECK(back.n == cfg.n);
  CHECK(back.outcome_indices == cfg.outcome_indices);
  CHECK(back.hist_outcome == 1);

  CHECK_THROWS_WITH_AS(SimConfig::from_json(nlohmann::json{{"nn", 4}}),
                       doctest::Contains("unknown"), Error);

  SimConfig bad;
  bad.n = 1;
  bad.lambda = 0.7;
  bad.reps = 0;
  try {
    bad.validate();
    FAIL("expected error");
  } catch (const Error& e) {
    // All violations are reported in one pass.
    const std::string msg = e.what();
    CHECK(msg.find("n and m") != std::string::npos);
    CHECK(msg.find("lambda must") != std::string::npos);
    CHECK(msg.find("reps") != std::string::npos);
  }
}
