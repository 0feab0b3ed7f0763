#pragma once

#include <optional>
#include <span>

#include "ofpca/model.hpp"

namespace ofpca {

/// Polynomially decaying step size a * k^(-gamma), optionally rescaled for
/// RSGD so its descent magnitude matches the normalized RAdam direction.
/// gamma in (0.5, 1] gives the convergent regime (sum a_k = inf,
/// sum a_k^2 < inf); smaller exponents are accepted for experimentation.
struct StepSchedule {
  double base = 0.2;            // a
  double decay = 0.6;           // gamma
  double rsgd_norm_scale = 1.0; // 1 for RAdam

  double step(long k) const;  // throws ConfigError when k < 1
};

/// First/second-moment state for Riemannian Adam. The coefficient momentum
/// lives in the tangent space of the iterate that produced it and is
/// re-projected before use.
struct AdamState {
  Matrix m_coef, v_coef;
  Vector m_log_eigen, v_log_eigen;
  double m_log_noise = 0.0, v_log_noise = 0.0;
  long step = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  static AdamState zero(int p, int rank, double beta1 = 0.9,
                        double beta2 = 0.999, double eps = 1e-8);
};

/// Running Riemannian average of the iterates, started at step start_step.
/// Before that the averages simply mirror the current iterate.
struct AvgState {
  StiefelPoint coef_avg;
  Vector log_eigen_avg;
  double log_noise_avg = 0.0;
  long start_step = 1;  // k_A
  long count = 0;       // iterates averaged so far

  static AvgState from(const ModelParams& params, long start_step);
  ModelParams to_params(const ModelParams& reference) const;
};

/// Per-step byproducts: the validation score of the incoming batch evaluated
/// before the update, the Frobenius norm of the Riemannian coefficient
/// gradient, and the post-step feasibility residual.
struct StepInfo {
  double pre_update_loss = 0.0;
  double grad_norm = 0.0;
  double residual = 0.0;
};

double adam_bias_factor(double beta1, double beta2, long k);
/// Entrywise direction factor * m / (sqrt(v) + eps).
Matrix adam_direction(const Matrix& m, const Matrix& v, double factor,
                      double eps);

ModelParams rsgd_step(const ModelParams& params, const StiefelGeometry& geom,
                      const std::vector<SubjectDesign>& designs,
                      std::span<const int> batch, const SplineSpace& space,
                      double tau, const StepSchedule& schedule, long k,
                      StepInfo* info = nullptr);

/// One Riemannian Adam step; `state.step` must equal k-1 on entry. When
/// coef_direction_out is non-null it receives the (unscaled by step size)
/// coefficient update direction passed to the retraction.
ModelParams radam_step(const ModelParams& params, AdamState& state,
                       const StiefelGeometry& geom,
                       const std::vector<SubjectDesign>& designs,
                       std::span<const int> batch, const SplineSpace& space,
                       double tau, const StepSchedule& schedule, long k,
                       StepInfo* info = nullptr,
                       Matrix* coef_direction_out = nullptr);

/// Folds the iterate reached after step k into the running average.
AvgState asgd_update(AvgState avg, const StiefelGeometry& geom,
                     const ModelParams& params, long k);

enum class OptimizerKind { rsgd, radam };

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::radam;
  AdamState adam;
  std::optional<AvgState> avg;
};

struct ChainState {
  ModelParams params;
  OptimizerState opt;
};

/// One streaming update of a chain: optimizer step, averaging, and periodic
/// re-orthonormalization (every reorth_every steps) against feasibility
/// drift. Returns the step byproducts; the reported residual is the one of
/// the freshly retracted iterate.
StepInfo advance_chain(ChainState& chain, const StiefelGeometry& geom,
                       const std::vector<SubjectDesign>& designs,
                       std::span<const int> batch, const SplineSpace& space,
                       double tau, const StepSchedule& schedule, long k,
                       long reorth_every = 500);

}  // namespace ofpca
