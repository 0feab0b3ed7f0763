#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ofpca/eval.hpp"
#include "ofpca/stream.hpp"
#include "ofpca/tuning.hpp"

namespace ofpca {

/// Full fitting configuration. Loadable from a flat key=value file; unknown
/// keys are rejected. CLI flags use the same names in kebab-case.
struct FitConfig {
  int rank = 3;
  int dims = 1;
  std::vector<Interval> domain;      // empty: unit box
  std::vector<int> degree = {3};     // broadcast across dimensions
  std::vector<int> inner_knots = {5};

  int batch_size = 5;
  int epochs = 1;
  OptimizerKind optimizer = OptimizerKind::radam;
  bool averaging = true;
  double step_a = 0.2;
  double step_gamma = 0.6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double delta = 1e-4;

  int q = 20;
  double omega = 0.5;
  int beam_width = 2;
  int branching = 3;
  double rho = 3.1622776601683795;  // sqrt(10)
  std::vector<double> tau_init;     // empty: derived from tau_max
  double tau_max = -1.0;            // <0: 0.1 (1D) or 0.001 (otherwise)

  int n_init = 100;
  double ridge = 1e-4;
  std::uint64_t seed = 1;
  long k_a = -1;  // <0: half of the first epoch's step count
  bool shuffle = true;
  CenterMode center = CenterMode::none;
  int center_bins = 10;

  void validate() const;
  std::vector<Interval> effective_domain() const;
  std::vector<int> per_dim(const std::vector<int>& values,
                           const char* what) const;
  std::vector<double> effective_tau_init() const;

  /// Applies one key=value assignment; throws ConfigError on unknown keys or
  /// unparseable values.
  void set(const std::string& key, const std::string& value);
  static FitConfig from_file(const std::string& path);
};

SplineSpace space_from_config(const FitConfig& config);

struct FitStats {
  double max_residual = 0.0;
  long feasibility_violations = 0;
  long total_steps = 0;
  double rsgd_norm_scale = 1.0;
};

struct FitResult {
  ModelParams params;                 // averaged when averaging is enabled
  ModelParams last_iterate;
  std::vector<StepRecord> history;    // the winning chain, start to finish
  std::vector<TuneLogRow> tuning_log;
  std::vector<std::pair<long, double>> tau_path;  // winning lineage
  double tau_final = 0.0;
  FitStats stats;
};

/// Full streaming pipeline: batch initialization on the leading subjects,
/// epoch 1 with beam-search tuning, remaining epochs with the selected
/// smoothing parameter frozen.
FitResult run_fit(const std::vector<Subject>& subjects,
                  const SplineSpace& space, const FitConfig& config);

}  // namespace ofpca
