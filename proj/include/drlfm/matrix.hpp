#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>

#include "drlfm/errors.hpp"

namespace drlfm {

using Index = Eigen::Index;
using BoolArray = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Dense real matrix with at least one row and column and only finite
/// entries. Immutable after construction.
class DenseMatrix {
 public:
  explicit DenseMatrix(Eigen::MatrixXd values);
  DenseMatrix(Index rows, Index cols, double fill);

  static DenseMatrix constant(Index rows, Index cols, double value) {
    return DenseMatrix(rows, cols, value);
  }

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  double operator()(Index i, Index j) const { return values_(i, j); }
  const Eigen::MatrixXd& eigen() const { return values_; }

 private:
  Eigen::MatrixXd values_;
};

/// Dense matrix plus an observation mask (true = observed). Values under
/// the mask are zeroed at construction so they can never leak into a
/// computation; reading an unobserved cell throws.
class MaskedMatrix {
 public:
  MaskedMatrix(const DenseMatrix& values, BoolArray mask);

  Index rows() const { return values_.rows(); }
  Index cols() const { return values_.cols(); }
  bool observed(Index i, Index j) const { return mask_(i, j); }
  double value(Index i, Index j) const;
  const BoolArray& mask() const { return mask_; }
  bool fully_observed() const { return mask_.all(); }
  Index observed_count() const { return mask_.count(); }

  DenseMatrix fill_missing(double value) const;

 private:
  Eigen::MatrixXd values_;  // zero where mask is false
  BoolArray mask_;
};

enum class NormKind { frobenius, one_two, two_inf, max };

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix hadamard_div(const DenseMatrix& a, const DenseMatrix& b);
MaskedMatrix mask_apply(const DenseMatrix& u, const BoolArray& observed);
DenseMatrix khatri_rao(const DenseMatrix& u, const DenseMatrix& v);
double norm(const DenseMatrix& u, NormKind kind);
DenseMatrix fill_missing(const MaskedMatrix& s, double value);

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const char* what);

}  // namespace drlfm
