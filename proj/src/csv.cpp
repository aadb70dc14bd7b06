#include "drlfm/csv.hpp"

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <vector>

namespace drlfm {

namespace {

// Splits one CSV record. Quoted fields may contain commas, doubled quotes,
// and (already joined) newlines; numeric data normally needs none of this.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          cur.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::optional<double> parse_field(const std::string& field, Index row,
                                  Index col) {
  std::size_t begin = field.find_first_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;
  std::size_t end = field.find_last_not_of(" \t") + 1;
  double value = 0.0;
  const char* first = field.data() + begin;
  const char* last = field.data() + end;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    fail(ErrorCode::io_error, "cannot parse '" + field + "' at row " +
                                 std::to_string(row) + ", column " +
                                 std::to_string(col));
  }
  return value;
}

struct ParsedCsv {
  std::vector<std::vector<std::optional<double>>> rows;
};

ParsedCsv parse_csv(std::istream& in, bool skip_header) {
  ParsedCsv out;
  std::string line;
  Index row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    line = trim_cr(line);
    if (first && skip_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty() && in.peek() == std::char_traits<char>::eof()) break;
    auto fields = split_record(line);
    std::vector<std::optional<double>> parsed;
    parsed.reserve(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      parsed.push_back(parse_field(fields[j], row, static_cast<Index>(j)));
    }
    if (!out.rows.empty() && parsed.size() != out.rows.front().size()) {
      fail(ErrorCode::io_error,
           "row " + std::to_string(row) + " has " +
               std::to_string(parsed.size()) + " fields, expected " +
               std::to_string(out.rows.front().size()));
    }
    out.rows.push_back(std::move(parsed));
    ++row;
  }
  if (out.rows.empty()) {
    fail(ErrorCode::io_error, "CSV input is empty");
  }
  return out;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    fail(ErrorCode::io_error, "cannot open '" + path + "' for reading");
  }
  return in;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    fail(ErrorCode::io_error, "cannot open '" + path + "' for writing");
  }
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

DenseMatrix read_dense_csv(std::istream& in, bool skip_header) {
  ParsedCsv parsed = parse_csv(in, skip_header);
  const Index n = static_cast<Index>(parsed.rows.size());
  const Index m = static_cast<Index>(parsed.rows.front().size());
  Eigen::MatrixXd values(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const auto& cell = parsed.rows[i][j];
      if (!cell) {
        fail(ErrorCode::io_error, "empty cell at row " + std::to_string(i) +
                                     ", column " + std::to_string(j) +
                                     " in dense matrix");
      }
      values(i, j) = *cell;
    }
  }
  return DenseMatrix(std::move(values));
}

MaskedMatrix read_masked_csv(std::istream& in, bool skip_header) {
  ParsedCsv parsed = parse_csv(in, skip_header);
  const Index n = static_cast<Index>(parsed.rows.size());
  const Index m = static_cast<Index>(parsed.rows.front().size());
  Eigen::MatrixXd values = Eigen::MatrixXd::Zero(n, m);
  BoolArray mask(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) {
      const auto& cell = parsed.rows[i][j];
      mask(i, j) = cell.has_value();
      if (cell) values(i, j) = *cell;
    }
  }
  return MaskedMatrix(DenseMatrix(std::move(values)), std::move(mask));
}

void write_dense_csv(std::ostream& out, const DenseMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_masked_csv(std::ostream& out, const MaskedMatrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      if (m.observed(i, j)) out << format_double(m.value(i, j));
    }
    out << '\n';
  }
}

DenseMatrix read_dense_csv_file(const std::string& path, bool skip_header) {
  auto in = open_input(path);
  return read_dense_csv(in, skip_header);
}

MaskedMatrix read_masked_csv_file(const std::string& path, bool skip_header) {
  auto in = open_input(path);
  return read_masked_csv(in, skip_header);
}

void write_dense_csv_file(const std::string& path, const DenseMatrix& m) {
  auto out = open_output(path);
  write_dense_csv(out, m);
}

void write_masked_csv_file(const std::string& path, const MaskedMatrix& m) {
  auto out = open_output(path);
  write_masked_csv(out, m);
}

MaskedMatrix read_masked_pair_files(const std::string& values_path,
                                    const std::string& mask_path,
                                    bool skip_header) {
  DenseMatrix values = read_dense_csv_file(values_path, skip_header);
  DenseMatrix mask_values = read_dense_csv_file(mask_path, skip_header);
  require_same_shape(values.eigen(), mask_values.eigen(), "masked pair");
  BoolArray mask(values.rows(), values.cols());
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      const double f = mask_values(i, j);
      if (f != 0.0 && f != 1.0) {
        fail(ErrorCode::io_error, "mask entry at (" + std::to_string(i) +
                                     "," + std::to_string(j) +
                                     ") must be 0 or 1");
      }
      mask(i, j) = f == 1.0;
    }
  }
  return MaskedMatrix(values, std::move(mask));
}

void write_masked_pair_files(const std::string& values_path,
                             const std::string& mask_path,
                             const MaskedMatrix& m) {
  write_dense_csv_file(values_path, m.fill_missing(0.0));
  auto out = open_output(mask_path);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << (m.observed(i, j) ? '1' : '0');
    }
    out << '\n';
  }
}

}  // namespace drlfm
