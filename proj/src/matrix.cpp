#include "drlfm/matrix.hpp"

#include <cmath>
#include <string>

namespace drlfm {

namespace {

void require_valid_dims(Index rows, Index cols) {
  if (rows < 1 || cols < 1) {
    fail(ErrorCode::invalid_argument,
         "matrix must have at least one row and one column, got " +
             std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void require_finite(const Eigen::MatrixXd& values) {
  if (!values.allFinite()) {
    for (Index j = 0; j < values.cols(); ++j) {
      for (Index i = 0; i < values.rows(); ++i) {
        if (!std::isfinite(values(i, j))) {
          fail(ErrorCode::nonfinite_value,
               "non-finite entry at (" + std::to_string(i) + "," +
                   std::to_string(j) + ")");
        }
      }
    }
  }
}

}  // namespace

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::dimension_mismatch,
         std::string(what) + ": shapes " + std::to_string(a.rows()) + "x" +
             std::to_string(a.cols()) + " and " + std::to_string(b.rows()) +
             "x" + std::to_string(b.cols()) + " differ");
  }
}

DenseMatrix::DenseMatrix(Eigen::MatrixXd values) : values_(std::move(values)) {
  require_valid_dims(values_.rows(), values_.cols());
  require_finite(values_);
}

DenseMatrix::DenseMatrix(Index rows, Index cols, double fill) {
  require_valid_dims(rows, cols);
  if (!std::isfinite(fill)) {
    fail(ErrorCode::nonfinite_value, "fill value is not finite");
  }
  values_ = Eigen::MatrixXd::Constant(rows, cols, fill);
}

MaskedMatrix::MaskedMatrix(const DenseMatrix& values, BoolArray mask)
    : mask_(std::move(mask)) {
  if (values.rows() != mask_.rows() || values.cols() != mask_.cols()) {
    fail(ErrorCode::dimension_mismatch,
         "mask shape " + std::to_string(mask_.rows()) + "x" +
             std::to_string(mask_.cols()) + " does not match values " +
             std::to_string(values.rows()) + "x" +
             std::to_string(values.cols()));
  }
  values_ = mask_.select(values.eigen().array(), 0.0).matrix();
}

double MaskedMatrix::value(Index i, Index j) const {
  if (!mask_(i, j)) {
    fail(ErrorCode::invalid_argument,
         "cell (" + std::to_string(i) + "," + std::to_string(j) +
             ") is unobserved");
  }
  return values_(i, j);
}

DenseMatrix MaskedMatrix::fill_missing(double value) const {
  if (!std::isfinite(value)) {
    fail(ErrorCode::nonfinite_value, "fill value is not finite");
  }
  return DenseMatrix(mask_.select(values_.array(), value).matrix());
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a.eigen(), b.eigen(), "hadamard");
  return DenseMatrix((a.eigen().array() * b.eigen().array()).matrix());
}

DenseMatrix hadamard_div(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a.eigen(), b.eigen(), "hadamard_div");
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < b.rows(); ++i) {
      if (b(i, j) == 0.0) {
        fail(ErrorCode::division_by_zero,
             "zero divisor at (" + std::to_string(i) + "," +
                 std::to_string(j) + ")");
      }
    }
  }
  return DenseMatrix((a.eigen().array() / b.eigen().array()).matrix());
}

MaskedMatrix mask_apply(const DenseMatrix& u, const BoolArray& observed) {
  if (u.rows() != observed.rows() || u.cols() != observed.cols()) {
    fail(ErrorCode::dimension_mismatch,
         "mask_apply: shapes " + std::to_string(u.rows()) + "x" +
             std::to_string(u.cols()) + " and " +
             std::to_string(observed.rows()) + "x" +
             std::to_string(observed.cols()) + " differ");
  }
  return MaskedMatrix(u, observed);
}

// Transposed column-wise Khatri-Rao product. With a = cols(u) and
// b = cols(v), output column q (0-based) pairs u column q % a with
// v column q / a, i.e. out(i, q) = u(i, q % a) * v(i, q / a). This is the
// 0-based form of the 1-based definition t_{i,j} = u_{i,j-a*jb} * v_{i,1+jb}
// with jb = floor((j-1)/a).
DenseMatrix khatri_rao(const DenseMatrix& u, const DenseMatrix& v) {
  if (u.rows() != v.rows()) {
    fail(ErrorCode::dimension_mismatch,
         "khatri_rao: row counts " + std::to_string(u.rows()) + " and " +
             std::to_string(v.rows()) + " differ");
  }
  const Index n = u.rows();
  const Index a = u.cols();
  const Index b = v.cols();
  Eigen::MatrixXd out(n, a * b);
  for (Index k = 0; k < b; ++k) {
    for (Index l = 0; l < a; ++l) {
      out.col(k * a + l) =
          u.eigen().col(l).array() * v.eigen().col(k).array();
    }
  }
  return DenseMatrix(std::move(out));
}

double norm(const DenseMatrix& u, NormKind kind) {
  switch (kind) {
    case NormKind::frobenius:
      return u.eigen().norm();
    case NormKind::one_two:
      return u.eigen().colwise().norm().maxCoeff();
    case NormKind::two_inf:
      return u.eigen().rowwise().norm().maxCoeff();
    case NormKind::max:
      return u.eigen().cwiseAbs().maxCoeff();
  }
  fail(ErrorCode::invalid_argument, "unknown norm kind");
}

DenseMatrix fill_missing(const MaskedMatrix& s, double value) {
  return s.fill_missing(value);
}

}  // namespace drlfm
