#include "ofpca/optim.hpp"

#include <cmath>
#include <string>

namespace ofpca {

double StepSchedule::step(long k) const {
  if (k < 1) throw ConfigError("step index must be >= 1");
  return base * std::pow(static_cast<double>(k), -decay) * rsgd_norm_scale;
}

AdamState AdamState::zero(int p, int rank, double beta1, double beta2,
                          double eps) {
  AdamState s;
  s.m_coef = Matrix::Zero(p, rank);
  s.v_coef = Matrix::Zero(p, rank);
  s.m_log_eigen = Vector::Zero(rank);
  s.v_log_eigen = Vector::Zero(rank);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  return s;
}

AvgState AvgState::from(const ModelParams& params, long start_step) {
  AvgState avg;
  avg.coef_avg = params.coef;
  avg.log_eigen_avg = params.log_eigen();
  avg.log_noise_avg = params.log_noise();
  avg.start_step = start_step;
  return avg;
}

ModelParams AvgState::to_params(const ModelParams& reference) const {
  ModelParams out = reference;
  out.coef = coef_avg;
  out.eigenvalues =
      ModelParams::eigen_from_log(log_eigen_avg, reference.var_floor);
  out.noise_var = std::exp(log_noise_avg) + reference.var_floor;
  return out;
}

double adam_bias_factor(double beta1, double beta2, long k) {
  return std::sqrt(1.0 - std::pow(beta2, static_cast<double>(k))) /
         (1.0 - std::pow(beta1, static_cast<double>(k)));
}

Matrix adam_direction(const Matrix& m, const Matrix& v, double factor,
                      double eps) {
  return factor * (m.array() / (v.array().sqrt() + eps)).matrix();
}

namespace {

// Retraction with step halving: at most 10 halvings before giving up.
StiefelPoint guarded_retract(const StiefelGeometry& geom,
                             const StiefelPoint& base, const Matrix& direction,
                             double scale) {
  for (int attempt = 0;; ++attempt) {
    try {
      return geom.retract(base, direction, scale);
    } catch (const StepError&) {
      if (attempt >= 10)
        throw NumericalError("retraction failed after 10 step halvings");
      scale *= 0.5;
    }
  }
}

}  // namespace

ModelParams rsgd_step(const ModelParams& params, const StiefelGeometry& geom,
                      const std::vector<SubjectDesign>& designs,
                      std::span<const int> batch, const SplineSpace& space,
                      double tau, const StepSchedule& schedule, long k,
                      StepInfo* info) {
  const BatchEval ev =
      eval_design_batch(designs, batch, space, params, tau, true);
  const Matrix riem = geom.riemannian_grad(params.coef, ev.grads.d_coef);
  const double alpha = schedule.step(k);

  ModelParams next = params;
  next.coef = guarded_retract(geom, params.coef, riem, -alpha);
  const Vector log_eigen = params.log_eigen() - alpha * ev.grads.d_log_eigen;
  next.eigenvalues = ModelParams::eigen_from_log(log_eigen, params.var_floor);
  next.noise_var =
      std::exp(params.log_noise() - alpha * ev.grads.d_log_noise) +
      params.var_floor;

  if (info) {
    info->pre_update_loss = ev.data_loss;
    info->grad_norm = riem.norm();
    info->residual = next.coef.residual;
  }
  return next;
}

ModelParams radam_step(const ModelParams& params, AdamState& state,
                       const StiefelGeometry& geom,
                       const std::vector<SubjectDesign>& designs,
                       std::span<const int> batch, const SplineSpace& space,
                       double tau, const StepSchedule& schedule, long k,
                       StepInfo* info, Matrix* coef_direction_out) {
  if (state.step != k - 1)
    throw StateError("optimizer state at step " + std::to_string(state.step) +
                     " cannot take step " + std::to_string(k));

  const BatchEval ev =
      eval_design_batch(designs, batch, space, params, tau, true);
  const Matrix riem = geom.riemannian_grad(params.coef, ev.grads.d_coef);
  const double alpha = schedule.step(k);
  const double b1 = state.beta1, b2 = state.beta2;

  // Past momentum is carried over to the current tangent space by projection.
  state.m_coef = (1.0 - b1) * riem +
                 b1 * geom.project_tangent(params.coef, state.m_coef);
  state.v_coef =
      (1.0 - b2) * riem.cwiseProduct(riem) + b2 * state.v_coef;
  state.m_log_eigen =
      (1.0 - b1) * ev.grads.d_log_eigen + b1 * state.m_log_eigen;
  state.v_log_eigen =
      (1.0 - b2) * ev.grads.d_log_eigen.cwiseProduct(ev.grads.d_log_eigen) +
      b2 * state.v_log_eigen;
  state.m_log_noise =
      (1.0 - b1) * ev.grads.d_log_noise + b1 * state.m_log_noise;
  state.v_log_noise = (1.0 - b2) * ev.grads.d_log_noise * ev.grads.d_log_noise +
                      b2 * state.v_log_noise;
  state.step = k;

  const double factor = adam_bias_factor(b1, b2, k);
  const Matrix direction =
      adam_direction(state.m_coef, state.v_coef, factor, state.eps);

  ModelParams next = params;
  next.coef = guarded_retract(geom, params.coef, direction, -alpha);
  const Vector log_eigen =
      params.log_eigen() -
      alpha * factor *
          (state.m_log_eigen.array() /
           (state.v_log_eigen.array().sqrt() + state.eps))
              .matrix();
  next.eigenvalues = ModelParams::eigen_from_log(log_eigen, params.var_floor);
  next.noise_var =
      std::exp(params.log_noise() -
               alpha * factor * state.m_log_noise /
                   (std::sqrt(state.v_log_noise) + state.eps)) +
      params.var_floor;

  if (info) {
    info->pre_update_loss = ev.data_loss;
    info->grad_norm = riem.norm();
    info->residual = next.coef.residual;
  }
  if (coef_direction_out) *coef_direction_out = direction;
  return next;
}

AvgState asgd_update(AvgState avg, const StiefelGeometry& geom,
                     const ModelParams& params, long k) {
  if (k < avg.start_step) {
    avg.coef_avg = params.coef;
    avg.log_eigen_avg = params.log_eigen();
    avg.log_noise_avg = params.log_noise();
    avg.count = 0;
    return avg;
  }
  avg.count += 1;
  const double inv_n = 1.0 / static_cast<double>(avg.count);
  if (avg.count == 1) {
    avg.coef_avg = params.coef;
  } else {
    const Matrix pull =
        geom.inverse_retract_approx(avg.coef_avg, params.coef);
    if (pull.norm() != 0.0)
      avg.coef_avg = geom.retract(avg.coef_avg, pull, inv_n);
  }
  avg.log_eigen_avg += inv_n * (params.log_eigen() - avg.log_eigen_avg);
  avg.log_noise_avg += inv_n * (params.log_noise() - avg.log_noise_avg);
  return avg;
}

StepInfo advance_chain(ChainState& chain, const StiefelGeometry& geom,
                       const std::vector<SubjectDesign>& designs,
                       std::span<const int> batch, const SplineSpace& space,
                       double tau, const StepSchedule& schedule, long k,
                       long reorth_every) {
  StepInfo info;
  if (chain.opt.kind == OptimizerKind::radam) {
    chain.params = radam_step(chain.params, chain.opt.adam, geom, designs,
                              batch, space, tau, schedule, k, &info);
  } else {
    chain.params = rsgd_step(chain.params, geom, designs, batch, space, tau,
                             schedule, k, &info);
  }
  if (chain.opt.avg)
    chain.opt.avg = asgd_update(std::move(*chain.opt.avg), geom, chain.params, k);
  if (reorth_every > 0 && k % reorth_every == 0)
    chain.params.coef = geom.orthonormalize(chain.params.coef.theta);
  return info;
}

}  // namespace ofpca
