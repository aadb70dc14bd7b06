#include "drlfm/cfsvd.hpp"

#include <algorithm>
#include <string>

#include "drlfm/tall_wide.hpp"

namespace drlfm {

namespace {

// Cross-fitted TW on a fully observed matrix. The tall input for a block
// (s,k) is S restricted to the columns of the complementary column set and
// the wide input is S restricted to the complementary row set, so the four
// blocks share two tall and two wide SVDs; each is computed once. Results
// are identical to running cross_fitted_mc with tw_complete block by block.
Eigen::MatrixXd cross_fitted_tw_dense(const Eigen::MatrixXd& s,
                                      const BlockPartition& p, int rank) {
  tw_detail::SvdParts tall[2];
  tw_detail::SvdParts wide[2];
  Eigen::MatrixXd scores_full[2];
  for (int k = 0; k < 2; ++k) {
    tall[k] = tw_detail::svd_parts(s(Eigen::all, p.cols(k)));
  }
  for (int si = 0; si < 2; ++si) {
    wide[si] = tw_detail::svd_parts(s(p.rows(si), Eigen::all));
  }
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (int si = 0; si < 2; ++si) {
    for (int ki = 0; ki < 2; ++ki) {
      const auto& rows = p.rows(si);
      const auto& cols = p.cols(ki);
      const auto& c_obs = p.cols(1 - ki);
      const Index max_rank =
          std::min<Index>(static_cast<Index>(p.rows(1 - si).size()),
                          static_cast<Index>(c_obs.size()));
      if (rank < 1 || rank > max_rank) {
        fail(ErrorCode::rank_infeasible,
             "block (" + std::to_string(si) + "," + std::to_string(ki) +
                 "): rank " + std::to_string(rank) + " not in [1, " +
                 std::to_string(max_rank) + "]");
      }
      Eigen::MatrixXd fitted;
      try {
        fitted =
            tw_detail::assemble(tall[1 - ki], wide[1 - si], c_obs, rank);
      } catch (const Error& e) {
        throw Error(e.code(), "block (" + std::to_string(si) + "," +
                                  std::to_string(ki) +
                                  "): " + std::string(e.what()));
      }
      for (Index i : rows) {
        for (Index j : cols) {
          out(i, j) = fitted(i, j);
        }
      }
    }
  }
  return out;
}

}  // namespace

void require_binary(const DenseMatrix& a, const char* what) {
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      const double v = a(i, j);
      if (v != 0.0 && v != 1.0) {
        fail(ErrorCode::invalid_argument,
             std::string(what) + " must be binary; entry (" +
                 std::to_string(i) + "," + std::to_string(j) + ") is " +
                 std::to_string(v));
      }
    }
  }
}

CfsvdConfig CfsvdConfig::from_model_ranks(int r_p, int r_theta0, int r_theta1,
                                          double lambda_bar) {
  CfsvdConfig cfg;
  cfg.rank_a = r_p;
  cfg.rank_y0bar = r_theta0 * (r_p + 1);
  cfg.rank_y1bar = r_theta1 * r_p;
  cfg.lambda_bar = lambda_bar;
  cfg.validate();
  return cfg;
}

void CfsvdConfig::validate() const {
  if (rank_a < 1 || rank_y0bar < 1 || rank_y1bar < 1) {
    fail(ErrorCode::invalid_argument, "TW ranks must be positive");
  }
  if (!(lambda_bar > 0.0 && lambda_bar <= 0.5)) {
    fail(ErrorCode::invalid_argument,
         "lambda_bar must lie in (0, 0.5], got " +
             std::to_string(lambda_bar));
  }
}

DenseMatrix project_interval(const DenseMatrix& m, double lo, double hi) {
  if (lo > hi) {
    fail(ErrorCode::invalid_argument,
         "interval bounds reversed: " + std::to_string(lo) + " > " +
             std::to_string(hi));
  }
  return DenseMatrix(m.eigen().cwiseMax(lo).cwiseMin(hi));
}

DenseMatrix estimate_propensity(const DenseMatrix& a, const BlockPartition& p,
                                const CfsvdConfig& cfg) {
  cfg.validate();
  require_binary(a, "treatment matrix");
  Eigen::MatrixXd fitted = cross_fitted_tw_dense(a.eigen(), p, cfg.rank_a);
  return project_interval(DenseMatrix(std::move(fitted)), cfg.lambda_bar,
                          1.0 - cfg.lambda_bar);
}

DenseMatrix estimate_theta(const DenseMatrix& y, const DenseMatrix& a,
                           const DenseMatrix& p_hat, int arm,
                           const BlockPartition& p, const CfsvdConfig& cfg) {
  cfg.validate();
  if (arm != 0 && arm != 1) {
    fail(ErrorCode::invalid_argument, "arm must be 0 or 1");
  }
  require_same_shape(y.eigen(), a.eigen(), "estimate_theta");
  require_same_shape(y.eigen(), p_hat.eigen(), "estimate_theta");
  Eigen::MatrixXd ybar;
  if (arm == 1) {
    ybar = (y.eigen().array() * a.eigen().array()).matrix();
  } else {
    ybar = (y.eigen().array() * (1.0 - a.eigen().array())).matrix();
  }
  const int rank = arm == 1 ? cfg.rank_y1bar : cfg.rank_y0bar;
  const DenseMatrix fitted(cross_fitted_tw_dense(ybar, p, rank));
  const DenseMatrix denom =
      arm == 1 ? p_hat
               : DenseMatrix((1.0 - p_hat.eigen().array()).matrix());
  return hadamard_div(fitted, denom);
}

NuisanceEstimates cfsvd(const DenseMatrix& y, const DenseMatrix& a,
                        const BlockPartition& p, const CfsvdConfig& cfg) {
  require_same_shape(y.eigen(), a.eigen(), "cfsvd");
  DenseMatrix p_hat = estimate_propensity(a, p, cfg);
  DenseMatrix theta0 = estimate_theta(y, a, p_hat, 0, p, cfg);
  DenseMatrix theta1 = estimate_theta(y, a, p_hat, 1, p, cfg);
  return NuisanceEstimates{std::move(theta0), std::move(theta1),
                           std::move(p_hat)};
}

}  // namespace drlfm
