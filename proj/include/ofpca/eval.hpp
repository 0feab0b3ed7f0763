#pragma once

#include <span>
#include <string>
#include <vector>

#include "ofpca/simgen.hpp"
#include "ofpca/tuning.hpp"

namespace ofpca {

/// Fitted components ready for evaluation on grids: each component r is the
/// function b(t)^T coef_r.
struct FpcEstimate {
  SplineSpace space;
  Matrix coef;  // p x R
  Vector eigenvalues;
  double noise_var = 0.0;

  int rank() const { return static_cast<int>(coef.cols()); }
  /// Component values at each location (rows) for each component (columns).
  Matrix eval_components(const Matrix& locations) const;
};

/// Regular evaluation grid over the box, resolution points per axis,
/// endpoints included; rows ordered with dimension 1 slowest.
Matrix grid_points(const std::vector<Interval>& domain, int resolution);

/// Sign-aligned root-mean-square error of each estimated component against
/// the truth on a regular grid: min over s in {-1, +1} of
/// sqrt(mean (s * estimate - truth)^2). Components are matched by index.
Vector fpc_rmse(const FpcEstimate& estimate, const SimTruth& truth,
                int grid_resolution);

/// Rank-R covariance reconstruction sum_r eigenvalue_r phi_r(s) phi_r(t).
double reconstruct_covariance(const FpcEstimate& estimate, const Vector& s,
                              const Vector& t);

struct DiagRow {
  long step = 0;
  double smoothed_grad_norm = 0.0;
  double v_score = 0.0;
  double tau = 0.0;
  Vector eigenvalues;
  double noise_var = 0.0;
};

/// Exponentially smoothed convergence series over a chain history; the first
/// smoothed value equals the first raw gradient norm.
std::vector<DiagRow> diagnostics(std::span<const StepRecord> history,
                                 double smoothing = 0.99);

/// Header: step,grad_norm,v_score,tau,lambda_1..lambda_R,sigma2.
void write_metrics_csv(const std::string& path, std::span<const DiagRow> rows);

void write_tuning_csv(const std::string& path,
                      std::span<const TuneLogRow> rows);

}  // namespace ofpca
