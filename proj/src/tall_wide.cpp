#include "drlfm/tall_wide.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <string>

namespace drlfm {

namespace {

bool contiguous(const std::vector<Index>& idx) {
  if (idx.empty()) return true;
  return idx.back() - idx.front() + 1 == static_cast<Index>(idx.size());
}

std::string cell_list(const MaskedMatrix& s, const std::vector<Index>& rows,
                      const std::vector<Index>& cols, std::size_t limit) {
  // Missing cells outside the leading contiguous run of r_miss/c_miss are
  // the witnesses of a non-block pattern.
  Index row_run_end = rows.empty() ? -1 : rows.front();
  for (std::size_t k = 1; k < rows.size(); ++k) {
    if (rows[k] != row_run_end + 1) break;
    row_run_end = rows[k];
  }
  Index col_run_end = cols.empty() ? -1 : cols.front();
  for (std::size_t k = 1; k < cols.size(); ++k) {
    if (cols[k] != col_run_end + 1) break;
    col_run_end = cols[k];
  }
  std::string out;
  std::size_t count = 0;
  for (Index i = 0; i < s.rows() && count < limit; ++i) {
    for (Index j = 0; j < s.cols() && count < limit; ++j) {
      if (s.observed(i, j)) continue;
      if (i > row_run_end || j > col_run_end) {
        if (!out.empty()) out += ", ";
        out += "(" + std::to_string(i) + "," + std::to_string(j) + ")";
        ++count;
      }
    }
  }
  return out;
}

}  // namespace

ObservedPattern detect_pattern(const MaskedMatrix& s) {
  ObservedPattern p;
  for (Index i = 0; i < s.rows(); ++i) {
    bool full = true;
    for (Index j = 0; j < s.cols(); ++j) {
      if (!s.observed(i, j)) {
        full = false;
        break;
      }
    }
    (full ? p.r_obs : p.r_miss).push_back(i);
  }
  for (Index j = 0; j < s.cols(); ++j) {
    bool full = true;
    for (Index i = 0; i < s.rows(); ++i) {
      if (!s.observed(i, j)) {
        full = false;
        break;
      }
    }
    (full ? p.c_obs : p.c_miss).push_back(j);
  }
  if (p.r_obs.empty()) {
    fail(ErrorCode::no_observed_rows, "no fully observed rows");
  }
  if (p.c_obs.empty()) {
    fail(ErrorCode::no_observed_cols, "no fully observed columns");
  }
  if (!contiguous(p.r_miss) || !contiguous(p.c_miss)) {
    fail(ErrorCode::not_block_missing,
         "missing cells are not confined to a single contiguous block; "
         "offending cells: " +
             cell_list(s, p.r_miss, p.c_miss, 10));
  }
  return p;
}

namespace tw_detail {

SvdParts svd_parts(const Eigen::MatrixXd& m) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(
      m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  SvdParts parts{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  for (Index k = 0; k < parts.u.cols(); ++k) {
    Index imax = 0;
    parts.u.col(k).cwiseAbs().maxCoeff(&imax);
    if (parts.u(imax, k) < 0.0) {
      parts.u.col(k) = -parts.u.col(k);
      parts.v.col(k) = -parts.v.col(k);
    }
  }
  return parts;
}

Eigen::MatrixXd assemble(const SvdParts& tall, const SvdParts& wide,
                         const std::vector<Index>& c_obs, int rank) {
  // An all-zero tall block has zero scores, so the estimate is zero no
  // matter how the factors are rotated.
  if (tall.sigma.size() == 0 || tall.sigma(0) <= 0.0) {
    return Eigen::MatrixXd::Zero(tall.u.rows(), wide.v.rows());
  }
  const Eigen::MatrixXd v_tall = tall.v.leftCols(rank);
  const Eigen::MatrixXd v_wide_full = wide.v.leftCols(rank);
  const Eigen::MatrixXd v_wide = v_wide_full(c_obs, Eigen::all);

  // Rotation solve by QR least squares; the normal-equations matrix
  // V_wide^T V_wide must be well conditioned (reciprocal condition of the
  // Gram matrix below 1e-12 is rejected).
  Eigen::JacobiSVD<Eigen::MatrixXd> gram_check(v_wide);
  const auto& sv = gram_check.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  if (smax <= 0.0 || (smin / smax) * (smin / smax) < 1e-12) {
    fail(ErrorCode::rotation_singular,
         "wide right-factor Gram matrix is numerically singular");
  }
  const Eigen::MatrixXd x = v_wide.colPivHouseholderQr().solve(v_tall);

  const Eigen::MatrixXd scores =
      tall.u.leftCols(rank) * tall.sigma.head(rank).asDiagonal();
  return scores * x.transpose() * v_wide_full.transpose();
}

}  // namespace tw_detail

DenseMatrix tw_complete(const MaskedMatrix& s, const TwConfig& cfg) {
  const ObservedPattern p = detect_pattern(s);
  const Index max_rank = std::min<Index>(static_cast<Index>(p.r_obs.size()),
                                         static_cast<Index>(p.c_obs.size()));
  if (cfg.rank < 1 || cfg.rank > max_rank) {
    fail(ErrorCode::rank_infeasible,
         "rank " + std::to_string(cfg.rank) + " not in [1, " +
             std::to_string(max_rank) + "]");
  }
  const Eigen::MatrixXd dense = s.fill_missing(0.0).eigen();
  const Eigen::MatrixXd tall = dense(Eigen::all, p.c_obs);
  const Eigen::MatrixXd wide = dense(p.r_obs, Eigen::all);
  const auto tall_parts = tw_detail::svd_parts(tall);
  const auto wide_parts = tw_detail::svd_parts(wide);
  return DenseMatrix(
      tw_detail::assemble(tall_parts, wide_parts, p.c_obs, cfg.rank));
}

}  // namespace drlfm
