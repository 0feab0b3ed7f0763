#include "ofpca/manifold.hpp"

#include <cmath>
#include <string>

namespace ofpca {

namespace {

// Solves Z L^T = Y for Z given the lower Cholesky factor L.
Matrix right_solve_lt(const Eigen::LLT<Matrix>& llt, const Matrix& y) {
  return llt.matrixL().solve(y.transpose()).transpose();
}

}  // namespace

StiefelGeometry::StiefelGeometry(Matrix gram) : gram_(std::move(gram)) {
  if (gram_.rows() != gram_.cols())
    throw NumericalError("metric matrix must be square");
  chol_.compute(gram_);
  if (chol_.info() != Eigen::Success)
    throw NumericalError("metric matrix is not positive definite");
}

double StiefelGeometry::feasibility_residual(const Matrix& theta) const {
  const Matrix gramian = theta.transpose() * gram_ * theta;
  return (gramian - Matrix::Identity(theta.cols(), theta.cols())).norm();
}

double StiefelGeometry::tangency_residual(const Matrix& theta,
                                          const Matrix& xi) const {
  const Matrix cross = theta.transpose() * gram_ * xi;
  return (0.5 * (cross + cross.transpose())).norm();
}

StiefelPoint StiefelGeometry::make_point(Matrix theta) const {
  const double residual = feasibility_residual(theta);
  return StiefelPoint{std::move(theta), residual};
}

void StiefelGeometry::require_feasible(const StiefelPoint& point) const {
  if (!(point.residual < kFeasibilityTol))
    throw StateError("base point infeasible: residual " +
                     std::to_string(point.residual));
}

Matrix StiefelGeometry::project_tangent(const StiefelPoint& base,
                                        const Matrix& xi) const {
  require_feasible(base);
  const Matrix cross = base.theta.transpose() * gram_ * xi;
  return xi - base.theta * (0.5 * (cross + cross.transpose()));
}

Matrix StiefelGeometry::riemannian_grad(const StiefelPoint& base,
                                        const Matrix& euclid_grad) const {
  return project_tangent(base, chol_.solve(euclid_grad));
}

StiefelPoint StiefelGeometry::retract(const StiefelPoint& base,
                                      const Matrix& xi, double scale) const {
  require_feasible(base);
  if (scale == 0.0) return base;
  const Matrix y = base.theta + scale * xi;
  Matrix gramian = y.transpose() * gram_ * y;
  gramian = 0.5 * (gramian + gramian.transpose());
  Eigen::LLT<Matrix> llt(gramian);
  if (llt.info() != Eigen::Success)
    throw StepError("retraction step left the feasible cone");
  return make_point(right_solve_lt(llt, y));
}

Matrix StiefelGeometry::inverse_retract_approx(const StiefelPoint& base,
                                               const StiefelPoint& target) const {
  require_feasible(target);
  return project_tangent(base, target.theta - base.theta);
}

StiefelPoint StiefelGeometry::orthonormalize(const Matrix& m) const {
  Matrix gramian = m.transpose() * gram_ * m;
  gramian = 0.5 * (gramian + gramian.transpose());
  Eigen::LLT<Matrix> llt(gramian);
  if (llt.info() != Eigen::Success)
    throw NumericalError("orthonormalization failed: rank-deficient input");
  const Matrix lower = llt.matrixL();
  const double dmax = lower.diagonal().maxCoeff();
  if (lower.diagonal().minCoeff() < 1e-12 * dmax)
    throw NumericalError("orthonormalization failed: rank-deficient input");
  return make_point(right_solve_lt(llt, m));
}

}  // namespace ofpca
