#pragma once

#include <stdexcept>
#include <string>

namespace drlfm {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  nonfinite_value,
  division_by_zero,
  not_block_missing,
  no_observed_rows,
  no_observed_cols,
  rank_infeasible,
  rotation_singular,
  partition_invalid,
  degenerate_split,
  insufficient_data,
  io_error,
};

// Single exception type for the whole library; `code` drives the CLI's
// exit-code mapping (validation vs numerical failure).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace drlfm
