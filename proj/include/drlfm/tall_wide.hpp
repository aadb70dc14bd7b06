#pragma once

#include <vector>

#include "drlfm/matrix.hpp"

namespace drlfm {

/// Classification of a masked matrix into fully observed rows/columns and
/// their complements. Valid inputs confine every missing cell to the
/// r_miss x c_miss block, with r_miss and c_miss contiguous index ranges.
struct ObservedPattern {
  std::vector<Index> r_obs;
  std::vector<Index> c_obs;
  std::vector<Index> r_miss;
  std::vector<Index> c_miss;
};

struct TwConfig {
  int rank = 1;
};

ObservedPattern detect_pattern(const MaskedMatrix& s);

/// Tall-Wide completion: SVDs of the fully observed column block (tall) and
/// row block (wide), aligned by a regression-based rotation. Recovers
/// noiseless rank-r block-missing matrices exactly and denoises fully
/// observed ones.
DenseMatrix tw_complete(const MaskedMatrix& s, const TwConfig& cfg);

namespace tw_detail {

// Thin SVD with a fixed sign convention: the largest-magnitude entry of
// each left singular vector is positive. Shared by tw_complete and the
// cross-fitted fast path so both produce identical blocks.
struct SvdParts {
  Eigen::MatrixXd u;       // n x k
  Eigen::VectorXd sigma;   // k
  Eigen::MatrixXd v;       // m x k
};

SvdParts svd_parts(const Eigen::MatrixXd& m);

// T_hat = U_tall Sigma_tall R Vbar_wide^T with R from the least-squares
// rotation of the tall right factors onto the wide right factors restricted
// to the observed columns.
Eigen::MatrixXd assemble(const SvdParts& tall, const SvdParts& wide,
                         const std::vector<Index>& c_obs, int rank);

}  // namespace tw_detail

}  // namespace drlfm
