#pragma once

#include <string>
#include <utility>
#include <vector>

#include "ofpca/fit.hpp"

namespace ofpca {

/// Serialized model: spline specification, coefficients (row-major, exact
/// round trip), variances, and fit metadata. Saving then loading then saving
/// again is byte-identical.
struct ModelFile {
  int format_version = 1;

  std::vector<Interval> domain;
  std::vector<int> degree;
  std::vector<int> inner_knots;

  Matrix coef;  // p x R
  Vector eigenvalues;
  double noise_var = 0.0;
  double var_floor = 0.0;

  std::vector<std::pair<long, double>> tau_path;
  double tau_final = 0.0;

  std::uint64_t seed = 0;
  int epochs = 0;
  long total_steps = 0;
  std::string optimizer;
  bool averaging = false;
  double max_residual = 0.0;

  SplineSpace make_space() const;
};

ModelFile model_file_from_fit(const FitResult& result, const FitConfig& config,
                              const SplineSpace& space);

void save_model(const std::string& path, const ModelFile& model);

/// Loads and re-verifies feasibility of the coefficients against the
/// reconstructed Gram matrix.
ModelFile load_model(const std::string& path);

}  // namespace ofpca
