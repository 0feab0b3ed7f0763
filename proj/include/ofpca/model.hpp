#pragma once

#include <span>
#include <string>
#include <vector>

#include "ofpca/basis.hpp"
#include "ofpca/manifold.hpp"

namespace ofpca {

/// One functional observation: values at irregular locations (m x d), already
/// centered.
struct Subject {
  std::string id;
  Matrix locations;  // m x d
  Vector values;     // length m
};

/// Model state: G-orthonormal basis coefficients (p x R), component variances
/// (descending at initialization), and the noise variance. Both variance
/// groups are kept strictly above var_floor through the log reparameterization
/// value = exp(log_value) + var_floor.
struct ModelParams {
  StiefelPoint coef;
  Vector eigenvalues;
  double noise_var = 0.0;
  double var_floor = 1e-4;

  int rank() const { return static_cast<int>(eigenvalues.size()); }
  Vector log_eigen() const {
    return (eigenvalues.array() - var_floor).log().matrix();
  }
  double log_noise() const { return std::log(noise_var - var_floor); }

  static Vector eigen_from_log(const Vector& log_eigen, double floor) {
    return (log_eigen.array().exp() + floor).matrix();
  }
};

/// Euclidean gradients of the penalized batch objective with respect to the
/// coefficients and the log-reparameterized variances.
struct EuclideanGrads {
  Matrix d_coef;
  Vector d_log_eigen;
  double d_log_noise = 0.0;
};

/// Cached per-subject design: basis matrix rows at the observation locations.
struct SubjectDesign {
  Matrix basis;  // m x p
  Vector values;
};

SubjectDesign make_design(const Subject& subject, const SplineSpace& space);
std::vector<SubjectDesign> make_designs(std::span<const Subject> subjects,
                                        const SplineSpace& space);

struct BatchEval {
  double data_loss = 0.0;     // average per-subject discrepancy
  double penalty_term = 0.0;  // tau * tr(coef^T P coef)
  EuclideanGrads grads;       // populated when requested

  double loss() const { return data_loss + penalty_term; }
};

/// Shared evaluation core over cached designs; `batch` holds indices into
/// `designs`. Subject terms are accumulated in batch order so repeated runs
/// are bitwise identical.
BatchEval eval_design_batch(const std::vector<SubjectDesign>& designs,
                            std::span<const int> batch,
                            const SplineSpace& space, const ModelParams& params,
                            double tau, bool with_grads);

/// Model covariance of one subject: (B coef) Diag(eigenvalues) (B coef)^T +
/// noise_var * I.
Matrix assemble_sigma(const Matrix& basis, const ModelParams& params);

/// Covariance discrepancy tr(Sigma^{-1} y y^T) + log|Sigma|.
double loss_subject(const Subject& subject, const SplineSpace& space,
                    const ModelParams& params);

/// Average subject discrepancy plus tau * tr(coef^T P coef).
double loss_batch(std::span<const Subject> batch, const SplineSpace& space,
                  const ModelParams& params, double tau);

EuclideanGrads grads_batch(std::span<const Subject> batch,
                           const SplineSpace& space, const ModelParams& params,
                           double tau);

/// Self-contained initializer: per-subject ridge projections, pooled second
/// moment, then a generalized eigenproblem against the Gram matrix. Component
/// variances come from the top eigenvalues (floored at 2 * var_floor) and the
/// noise variance from the pooled squared projection residuals.
ModelParams batch_init(std::span<const Subject> subjects,
                       const SplineSpace& space, int rank, double ridge,
                       double var_floor);

}  // namespace ofpca
