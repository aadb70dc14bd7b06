#pragma once

#include <iosfwd>
#include <string>

#include "drlfm/matrix.hpp"

namespace drlfm {

// RFC-4180 CSV with '.' decimal separator and no header row by default.
// Doubles are written in shortest round-trip form, so write/read is
// value-exact. A MaskedMatrix is one CSV with empty fields for missing
// cells, or a value CSV plus a 0/1 mask CSV.

DenseMatrix read_dense_csv(std::istream& in, bool skip_header = false);
DenseMatrix read_dense_csv_file(const std::string& path,
                                bool skip_header = false);
void write_dense_csv(std::ostream& out, const DenseMatrix& m);
void write_dense_csv_file(const std::string& path, const DenseMatrix& m);

MaskedMatrix read_masked_csv(std::istream& in, bool skip_header = false);
MaskedMatrix read_masked_csv_file(const std::string& path,
                                  bool skip_header = false);
void write_masked_csv(std::ostream& out, const MaskedMatrix& m);
void write_masked_csv_file(const std::string& path, const MaskedMatrix& m);

MaskedMatrix read_masked_pair_files(const std::string& values_path,
                                    const std::string& mask_path,
                                    bool skip_header = false);
void write_masked_pair_files(const std::string& values_path,
                             const std::string& mask_path,
                             const MaskedMatrix& m);

std::string format_double(double v);

}  // namespace drlfm
