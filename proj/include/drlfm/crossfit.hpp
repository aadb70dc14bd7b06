#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "drlfm/matrix.hpp"

namespace drlfm {

/// 2x2 block partition of [N] x [M]: disjoint nonempty row sets r0/r1
/// covering all rows, and column sets c0/c1 covering all columns.
struct BlockPartition {
  std::vector<Index> r0, r1, c0, c1;

  static BlockPartition make(std::vector<Index> r0, std::vector<Index> r1,
                             std::vector<Index> c0, std::vector<Index> c1);

  const std::vector<Index>& rows(int s) const { return s == 0 ? r0 : r1; }
  const std::vector<Index>& cols(int k) const { return k == 0 ? c0 : c1; }
  Index n() const { return static_cast<Index>(r0.size() + r1.size()); }
  Index m() const { return static_cast<Index>(c0.size() + c1.size()); }
};

/// Contiguous halves: r0 = first floor(n/2) rows, c0 = first floor(m/2)
/// columns.
BlockPartition default_partition(Index n, Index m);

/// Seeded shuffle of row and column indices before halving. The caller is
/// responsible for choosing a partition compatible with the dependence
/// structure of the noise.
BlockPartition shuffled_partition(Index n, Index m, std::uint64_t seed);

BlockPartition partition_from_json(const nlohmann::json& j, Index n, Index m);
nlohmann::json partition_to_json(const BlockPartition& p);

/// Marks every cell of rows x cols as missing; all other cells keep their
/// original mask and value.
MaskedMatrix mask_block(const MaskedMatrix& s, const std::vector<Index>& rows,
                        const std::vector<Index>& cols);

using CompletionFn = std::function<DenseMatrix(const MaskedMatrix&)>;

/// Cross-fitted matrix completion: each block of the partition is estimated
/// by running `mc` on the input with that block masked out, so the block's
/// estimate depends only on the other three blocks. `mc` must be a pure
/// function. Blocks whose index sets are not contiguous are brought to a
/// trailing contiguous position by row/column reordering before `mc` runs
/// and mapped back afterwards.
DenseMatrix cross_fitted_mc(const CompletionFn& mc, const MaskedMatrix& s,
                            const BlockPartition& p);

}  // namespace drlfm
