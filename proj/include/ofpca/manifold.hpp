#pragma once

#include <Eigen/Dense>

#include "ofpca/basis.hpp"
#include "ofpca/errors.hpp"

namespace ofpca {

/// A point on the generalized Stiefel manifold {M : M^T G M = I}, together
/// with its feasibility residual ||M^T G M - I||_F. Points are produced by
/// StiefelGeometry operations, which keep the residual below 1e-8.
struct StiefelPoint {
  Matrix theta;
  double residual = 0.0;

  int rows() const { return static_cast<int>(theta.rows()); }
  int cols() const { return static_cast<int>(theta.cols()); }
};

/// Operations on the generalized Stiefel manifold induced by an SPD matrix G,
/// under the metric <xi, eta> = tr(xi^T G eta). The Cholesky factor of G is
/// cached at construction; all operations are const and thread-safe.
class StiefelGeometry {
 public:
  explicit StiefelGeometry(Matrix gram);

  const Matrix& gram() const { return gram_; }
  int dim() const { return static_cast<int>(gram_.rows()); }

  double feasibility_residual(const Matrix& theta) const;
  /// ||sym(theta^T G xi)||_F; zero for tangent vectors.
  double tangency_residual(const Matrix& theta, const Matrix& xi) const;

  /// Wraps a raw matrix, computing its residual. No feasibility repair.
  StiefelPoint make_point(Matrix theta) const;

  /// Removes the component of xi normal to the manifold at the base point:
  /// xi - theta * sym(theta^T G xi).
  Matrix project_tangent(const StiefelPoint& base, const Matrix& xi) const;

  /// Riemannian gradient from a Euclidean one: project_tangent(G^{-1} dF).
  Matrix riemannian_grad(const StiefelPoint& base,
                         const Matrix& euclid_grad) const;

  /// Cholesky retraction: Y = theta + scale * xi, returns Y L^{-T} with
  /// L L^T = Y^T G Y. Throws StepError when Y^T G Y is not numerically SPD.
  /// scale == 0 returns the base point unchanged, bit for bit.
  StiefelPoint retract(const StiefelPoint& base, const Matrix& xi,
                       double scale) const;

  /// First-order inverse retraction: project_tangent(base, target - base).
  Matrix inverse_retract_approx(const StiefelPoint& base,
                                const StiefelPoint& target) const;

  /// G-orthonormalizes the columns of a full-column-rank matrix, preserving
  /// the column space.
  StiefelPoint orthonormalize(const Matrix& m) const;

  double metric_inner(const Matrix& xi, const Matrix& eta) const {
    return (xi.transpose() * gram_ * eta).trace();
  }
  double metric_norm(const Matrix& xi) const {
    return std::sqrt(std::max(0.0, metric_inner(xi, xi)));
  }

  /// Hard feasibility threshold on inputs to manifold operations.
  static constexpr double kFeasibilityTol = 1e-6;

 private:
  void require_feasible(const StiefelPoint& point) const;

  Matrix gram_;
  Eigen::LLT<Matrix> chol_;
};

}  // namespace ofpca
