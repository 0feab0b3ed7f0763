#include "ofpca/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace ofpca {

Matrix FpcEstimate::eval_components(const Matrix& locations) const {
  return space.basis_matrix(locations) * coef;
}

Matrix grid_points(const std::vector<Interval>& domain, int resolution) {
  if (resolution < 2) throw ConfigError("grid resolution must be >= 2");
  const int d = static_cast<int>(domain.size());
  long total = 1;
  for (int c = 0; c < d; ++c) total *= resolution;

  Matrix pts(total, d);
  for (long row = 0; row < total; ++row) {
    long rem = row;
    for (int c = d - 1; c >= 0; --c) {
      const long idx = rem % resolution;
      rem /= resolution;
      pts(row, c) = domain[c].lo + (domain[c].hi - domain[c].lo) * idx /
                                       (resolution - 1);
    }
  }
  return pts;
}

Vector fpc_rmse(const FpcEstimate& estimate, const SimTruth& truth,
                int grid_resolution) {
  if (estimate.space.dims() != truth.dims())
    throw ConfigError("estimate and truth have different domain dimensions");
  if (estimate.rank() > truth.components())
    throw ConfigError("estimate rank exceeds the number of true components");

  const Matrix pts = grid_points(estimate.space.domain(), grid_resolution);
  const Matrix fitted = estimate.eval_components(pts);
  const long n = pts.rows();

  Vector rmse(estimate.rank());
  for (int r = 0; r < estimate.rank(); ++r) {
    double plus = 0.0, minus = 0.0;
    for (long i = 0; i < n; ++i) {
      const double target = truth.eigenfunction(r, pts.row(i).transpose());
      plus += (fitted(i, r) - target) * (fitted(i, r) - target);
      minus += (fitted(i, r) + target) * (fitted(i, r) + target);
    }
    rmse[r] = std::sqrt(std::min(plus, minus) / n);
  }
  return rmse;
}

double reconstruct_covariance(const FpcEstimate& estimate, const Vector& s,
                              const Vector& t) {
  const Vector bs = estimate.space.eval_basis(s);
  const Vector bt = estimate.space.eval_basis(t);
  const Vector phi_s = estimate.coef.transpose() * bs;
  const Vector phi_t = estimate.coef.transpose() * bt;
  return (estimate.eigenvalues.array() * phi_s.array() * phi_t.array()).sum();
}

std::vector<DiagRow> diagnostics(std::span<const StepRecord> history,
                                 double smoothing) {
  if (history.empty()) throw ConfigError("empty step history");
  std::vector<DiagRow> rows;
  rows.reserve(history.size());
  double smoothed = history.front().grad_norm;
  for (const StepRecord& rec : history) {
    smoothed = smoothing * smoothed + (1.0 - smoothing) * rec.grad_norm;
    DiagRow row;
    row.step = rec.step;
    row.smoothed_grad_norm = smoothed;
    row.v_score = rec.v_score;
    row.tau = rec.tau;
    row.eigenvalues = rec.eigenvalues;
    row.noise_var = rec.noise_var;
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_metrics_csv(const std::string& path,
                       std::span<const DiagRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  const int rank = rows.empty() ? 0 : static_cast<int>(rows.front().eigenvalues.size());
  out << "step,grad_norm,v_score,tau";
  for (int r = 1; r <= rank; ++r) out << ",lambda_" << r;
  out << ",sigma2\n";
  for (const DiagRow& row : rows) {
    out << row.step << ',' << fmt(row.smoothed_grad_norm) << ','
        << fmt(row.v_score) << ',' << fmt(row.tau);
    for (int r = 0; r < rank; ++r) out << ',' << fmt(row.eigenvalues[r]);
    out << ',' << fmt(row.noise_var) << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

void write_tuning_csv(const std::string& path,
                      std::span<const TuneLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "block,candidate,tau,abv,selected\n";
  for (const TuneLogRow& row : rows)
    out << row.block << ',' << row.candidate << ',' << fmt(row.tau) << ','
        << fmt(row.abv) << ',' << (row.selected ? 1 : 0) << '\n';
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace ofpca
