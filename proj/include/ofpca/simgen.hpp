#pragma once

#include <cstdint>
#include <string>

#include "ofpca/model.hpp"

namespace ofpca {

/// Closed-form ground truth for the built-in simulation designs: orthonormal
/// eigenfunctions on the unit box, their variances, and the sampling scheme
/// for per-subject observation counts and noise.
class SimTruth {
 public:
  /// Curves on [0,1]: phi_1 = 1, phi_r = sqrt(2) cos((r-1) pi t) for ten
  /// components with variances 0.4 r^-2; about six observations per subject,
  /// noise sd 0.5.
  static SimTruth builtin_1d();

  /// Surfaces on [0,1]^2: products of sqrt(2) cos(k pi t) factors, six
  /// components with variances 2^{-r+1}; about 25 observations per subject,
  /// noise sd 0.2.
  static SimTruth builtin_2d();

  /// Accepts "1d", "2d", "builtin:1d", "builtin:2d".
  static SimTruth by_name(const std::string& name);

  const std::string& name() const { return name_; }
  int dims() const { return dims_; }
  int components() const { return static_cast<int>(eigenvalues_.size()); }
  const Vector& eigenvalues() const { return eigenvalues_; }
  double noise_sd() const { return noise_sd_; }
  double obs_mean() const { return obs_mean_; }
  double obs_sd() const { return obs_sd_; }
  std::vector<Interval> domain() const {
    return std::vector<Interval>(dims_, Interval{0.0, 1.0});
  }

  /// Value of eigenfunction r (0-based) at a point.
  double eigenfunction(int r, const Vector& t) const;

 private:
  std::string name_;
  int dims_ = 1;
  Vector eigenvalues_;
  double noise_sd_ = 0.0;
  double obs_mean_ = 0.0;
  double obs_sd_ = 0.0;
};

/// Generated dataset plus the latent quantities used to build it, kept for
/// verification: per-subject component scores and noiseless values.
struct SimData {
  std::vector<Subject> subjects;
  SimTruth truth;
  Matrix scores;                  // n x components
  std::vector<Vector> noiseless;  // per subject, length m_i
};

/// Draws n subjects from the design. Subject i consumes its own counter-based
/// substream, so generation is reproducible and partitionable.
SimData generate(const SimTruth& truth, long n, std::uint64_t seed);

SimData gen_1d(long n, std::uint64_t seed);
SimData gen_2d(long n, std::uint64_t seed);

}  // namespace ofpca
