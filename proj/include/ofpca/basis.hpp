#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ofpca/errors.hpp"

namespace ofpca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};

/// One-dimensional B-spline basis on a closed interval. Interior knots are
/// equally spaced; boundary knots are repeated degree+1 times, so the basis
/// is clamped and has inner_knots + degree + 1 functions.
class MarginalSpline {
 public:
  MarginalSpline(Interval domain, int inner_knots, int degree);

  int degree() const { return degree_; }
  int size() const { return size_; }
  Interval domain() const { return domain_; }
  const std::vector<double>& knots() const { return knots_; }
  bool contains(double t) const {
    return t >= domain_.lo && t <= domain_.hi;
  }

  /// Values of all basis functions at t (dense, length size()).
  Vector eval(double t) const;

  /// Second derivatives of all basis functions at t. Requires degree >= 2.
  Vector eval_derivative2(double t) const;

  /// Exact integral of b(t) b(t)^T over the domain.
  const Matrix& gram() const { return gram_; }

  /// Exact integral of b''(t) b''(t)^T; requires degree >= 2.
  const Matrix& derivative2_gram() const;

 private:
  int find_span(double t) const;
  // All degree+1 basis values on the span, de Boor style.
  void basis_funs(int span, double t, double* values) const;
  // Rows 0..order of derivatives for the degree+1 functions on the span.
  void basis_derivs(int span, double t, int order, Matrix& ders) const;
  void build_grams();

  Interval domain_;
  int degree_ = 0;
  int size_ = 0;
  std::vector<double> knots_;
  Matrix gram_;
  Matrix d2_gram_;
  bool has_d2_ = false;
};

/// Tensor-product B-spline space over a d-dimensional box, with the exact
/// Gram matrix and (for degrees >= 2) the tensor-product second-derivative
/// roughness penalty. Index ordering: dimension 1 varies slowest.
/// Immutable after construction; safe to share across threads.
class SplineSpace {
 public:
  SplineSpace(std::vector<Interval> domain, std::vector<int> inner_knots,
              std::vector<int> degrees);

  static SplineSpace make(std::vector<Interval> domain,
                          std::vector<int> inner_knots, int degree);

  int dims() const { return static_cast<int>(marginals_.size()); }
  int size() const { return size_; }
  const MarginalSpline& marginal(int j) const { return marginals_[j]; }
  const std::vector<Interval>& domain() const { return domain_; }

  bool in_domain(const Vector& t) const;

  /// Tensor-product basis values at a d-dimensional point, length size().
  Vector eval_basis(const Vector& t) const;

  /// Rows are eval_basis at each location (locations: m x d).
  Matrix basis_matrix(const Matrix& locations) const;

  const Matrix& gram() const { return gram_; }

  bool has_penalty() const { return has_penalty_; }
  /// Second-derivative roughness penalty; throws ConfigError when any
  /// marginal degree is below 2.
  const Matrix& penalty() const;

 private:
  std::vector<Interval> domain_;
  std::vector<MarginalSpline> marginals_;
  int size_ = 1;
  Matrix gram_;
  Matrix penalty_;
  bool has_penalty_ = false;
};

/// Kronecker product with the row-major (first factor slowest) ordering used
/// throughout for tensor-product bases.
Matrix kronecker(const Matrix& a, const Matrix& b);

}  // namespace ofpca
