#include "drlfm/crossfit.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "drlfm/rng.hpp"

namespace drlfm {

namespace {

bool sorted_unique(const std::vector<Index>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] <= v[k - 1]) return false;
  }
  return true;
}

void check_axis(const std::vector<Index>& a, const std::vector<Index>& b,
                Index extent, const char* axis) {
  if (a.empty() || b.empty()) {
    fail(ErrorCode::partition_invalid,
         std::string("partition has an empty ") + axis + " set");
  }
  if (!sorted_unique(a) || !sorted_unique(b)) {
    fail(ErrorCode::partition_invalid,
         std::string(axis) + " sets must be sorted and duplicate-free");
  }
  std::vector<Index> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(),
             std::back_inserter(merged));
  if (merged.size() != static_cast<std::size_t>(extent)) {
    fail(ErrorCode::partition_invalid,
         std::string(axis) + " sets do not cover the axis exactly");
  }
  for (Index k = 0; k < extent; ++k) {
    if (merged[static_cast<std::size_t>(k)] != k) {
      fail(ErrorCode::partition_invalid,
           std::string(axis) + " sets must partition 0.." +
               std::to_string(extent - 1));
    }
  }
}

bool contiguous(const std::vector<Index>& idx) {
  return idx.back() - idx.front() + 1 == static_cast<Index>(idx.size());
}

std::vector<Index> complement(const std::vector<Index>& idx, Index extent) {
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(extent) - idx.size());
  std::size_t k = 0;
  for (Index i = 0; i < extent; ++i) {
    if (k < idx.size() && idx[k] == i) {
      ++k;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<Index> shuffled_halve(Index extent, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(extent));
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index i = extent - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.next_u64() %
                                      static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)],
              idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(extent / 2));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

BlockPartition BlockPartition::make(std::vector<Index> r0,
                                    std::vector<Index> r1,
                                    std::vector<Index> c0,
                                    std::vector<Index> c1) {
  BlockPartition p{std::move(r0), std::move(r1), std::move(c0),
                   std::move(c1)};
  check_axis(p.r0, p.r1, p.n(), "row");
  check_axis(p.c0, p.c1, p.m(), "column");
  return p;
}

BlockPartition default_partition(Index n, Index m) {
  if (n < 2 || m < 2) {
    fail(ErrorCode::partition_invalid,
         "partition needs at least 2 rows and 2 columns, got " +
             std::to_string(n) + "x" + std::to_string(m));
  }
  std::vector<Index> r0(static_cast<std::size_t>(n / 2));
  std::iota(r0.begin(), r0.end(), Index{0});
  std::vector<Index> c0(static_cast<std::size_t>(m / 2));
  std::iota(c0.begin(), c0.end(), Index{0});
  return BlockPartition::make(r0, complement(r0, n), c0, complement(c0, m));
}

BlockPartition shuffled_partition(Index n, Index m, std::uint64_t seed) {
  if (n < 2 || m < 2) {
    fail(ErrorCode::partition_invalid,
         "partition needs at least 2 rows and 2 columns, got " +
             std::to_string(n) + "x" + std::to_string(m));
  }
  Rng row_rng(seed, 0x70617274ULL);
  Rng col_rng(seed, 0x70617275ULL);
  auto r0 = shuffled_halve(n, row_rng);
  auto c0 = shuffled_halve(m, col_rng);
  return BlockPartition::make(r0, complement(r0, n), c0, complement(c0, m));
}

BlockPartition partition_from_json(const nlohmann::json& j, Index n,
                                   Index m) {
  if (!j.is_object() || !j.contains("r0") || !j.contains("c0")) {
    fail(ErrorCode::partition_invalid,
         "partition JSON must be an object with r0 and c0 arrays");
  }
  auto load = [](const nlohmann::json& arr, Index extent, const char* name) {
    std::vector<Index> out;
    for (const auto& v : arr) {
      if (!v.is_number_integer()) {
        fail(ErrorCode::partition_invalid,
             std::string(name) + " must contain integers");
      }
      const auto idx = v.get<Index>();
      if (idx < 0 || idx >= extent) {
        fail(ErrorCode::partition_invalid,
             std::string(name) + " index " + std::to_string(idx) +
                 " out of range");
      }
      out.push_back(idx);
    }
    std::sort(out.begin(), out.end());
    return out;
  };
  auto r0 = load(j.at("r0"), n, "r0");
  auto c0 = load(j.at("c0"), m, "c0");
  return BlockPartition::make(r0, complement(r0, n), c0, complement(c0, m));
}

nlohmann::json partition_to_json(const BlockPartition& p) {
  return nlohmann::json{{"r0", p.r0}, {"c0", p.c0}};
}

MaskedMatrix mask_block(const MaskedMatrix& s, const std::vector<Index>& rows,
                        const std::vector<Index>& cols) {
  BoolArray mask = s.mask();
  for (Index i : rows) {
    for (Index j : cols) {
      mask(i, j) = false;
    }
  }
  return MaskedMatrix(s.fill_missing(0.0), std::move(mask));
}

DenseMatrix cross_fitted_mc(const CompletionFn& mc, const MaskedMatrix& s,
                            const BlockPartition& p) {
  if (p.n() != s.rows() || p.m() != s.cols()) {
    fail(ErrorCode::partition_invalid,
         "partition extent " + std::to_string(p.n()) + "x" +
             std::to_string(p.m()) + " does not match matrix " +
             std::to_string(s.rows()) + "x" + std::to_string(s.cols()));
  }
  Eigen::MatrixXd out(s.rows(), s.cols());
  for (int si = 0; si < 2; ++si) {
    for (int ki = 0; ki < 2; ++ki) {
      const auto& rows = p.rows(si);
      const auto& cols = p.cols(ki);
      const MaskedMatrix masked = mask_block(s, rows, cols);
      try {
        if (contiguous(rows) && contiguous(cols)) {
          const DenseMatrix fitted = mc(masked);
          if (fitted.rows() != s.rows() || fitted.cols() != s.cols()) {
            fail(ErrorCode::dimension_mismatch,
                 "completion routine changed the matrix shape");
          }
          for (Index i : rows) {
            for (Index j : cols) {
              out(i, j) = fitted(i, j);
            }
          }
        } else {
          // Reorder so the masked block sits in the trailing corner, which
          // keeps the block-missing precondition of routines like TW.
          std::vector<Index> row_order = complement(rows, s.rows());
          const Index row_keep = static_cast<Index>(row_order.size());
          row_order.insert(row_order.end(), rows.begin(), rows.end());
          std::vector<Index> col_order = complement(cols, s.cols());
          const Index col_keep = static_cast<Index>(col_order.size());
          col_order.insert(col_order.end(), cols.begin(), cols.end());

          const Eigen::MatrixXd vperm =
              masked.fill_missing(0.0).eigen()(row_order, col_order);
          BoolArray mperm(s.rows(), s.cols());
          for (Index i = 0; i < s.rows(); ++i) {
            for (Index j = 0; j < s.cols(); ++j) {
              mperm(i, j) = masked.mask()(row_order[static_cast<std::size_t>(
                                              i)],
                                          col_order[static_cast<std::size_t>(
                                              j)]);
            }
          }
          const DenseMatrix fitted =
              mc(MaskedMatrix(DenseMatrix(vperm), std::move(mperm)));
          if (fitted.rows() != s.rows() || fitted.cols() != s.cols()) {
            fail(ErrorCode::dimension_mismatch,
                 "completion routine changed the matrix shape");
          }
          for (std::size_t bi = 0; bi < rows.size(); ++bi) {
            for (std::size_t bj = 0; bj < cols.size(); ++bj) {
              out(rows[bi], cols[bj]) =
                  fitted(row_keep + static_cast<Index>(bi),
                         col_keep + static_cast<Index>(bj));
            }
          }
        }
      } catch (const Error& e) {
        throw Error(e.code(), "block (" + std::to_string(si) + "," +
                                  std::to_string(ki) +
                                  "): " + std::string(e.what()));
      }
    }
  }
  return DenseMatrix(std::move(out));
}

}  // namespace drlfm
