#include <doctest.h>

#include <sstream>

#include "drlfm/csv.hpp"
#include "drlfm/rng.hpp"

using namespace drlfm;

TEST_CASE("dense CSV round trip is value-exact") {
  Rng rng(1, 0);
  Eigen::MatrixXd m(4, 3);
  for (Index j = 0; j < 3; ++j) {
    for (Index i = 0; i < 4; ++i) m(i, j) = rng.uniform(-1e6, 1e6) / 7.0;
  }
  m(0, 0) = 0.1;
  m(1, 1) = -1e-300;
  std::stringstream buf;
  write_dense_csv(buf, DenseMatrix(m));
  const DenseMatrix back = read_dense_csv(buf);
  CHECK((back.eigen().array() == m.array()).all());
}

TEST_CASE("masked CSV uses empty fields for missing cells") {
  Eigen::MatrixXd m(2, 2);
  m << 1.5, 0.0, -2.0, 3.25;
  BoolArray mask(2, 2);
  mask << true, false, true, true;
  std::stringstream buf;
  write_masked_csv(buf, MaskedMatrix(DenseMatrix(m), mask));
  CHECK(buf.str() == "1.5,\n-2,3.25\n");
  const MaskedMatrix back = read_masked_csv(buf);
  CHECK(!back.observed(0, 1));
  CHECK(back.value(1, 1) == 3.25);
}

TEST_CASE("reader accepts CRLF, quoted fields, and optional header") {
  std::stringstream buf("a,b\r\n\"1\",2\r\n3,4\r\n");
  const DenseMatrix m = read_dense_csv(buf, /*skip_header=*/true);
  CHECK(m.rows() == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(1, 1) == 4.0);
}

TEST_CASE("reader rejects ragged rows and junk") {
  std::stringstream ragged("1,2\n3\n");
  CHECK_THROWS_AS(read_dense_csv(ragged), Error);
  std::stringstream junk("1,x\n");
  CHECK_THROWS_AS(read_dense_csv(junk), Error);
  std::stringstream empty_cell("1,\n2,3\n");
  CHECK_THROWS_AS(read_dense_csv(empty_cell), Error);
  std::stringstream empty("");
  CHECK_THROWS_AS(read_dense_csv(empty), Error);
}

TEST_CASE("masked pair files round trip") {
  Eigen::MatrixXd m(2, 3);
  m << 1, 2, 3, 4, 5, 6;
  BoolArray mask(2, 3);
  mask << true, true, false, false, true, true;
  const MaskedMatrix original(DenseMatrix(m), mask);
  const std::string values = "/tmp/drlfm_test_values.csv";
  const std::string flags = "/tmp/drlfm_test_mask.csv";
  write_masked_pair_files(values, flags, original);
  const MaskedMatrix back = read_masked_pair_files(values, flags);
  CHECK((back.mask() == original.mask()).all());
  CHECK(back.fill_missing(-9).eigen() == original.fill_missing(-9).eigen());
}
