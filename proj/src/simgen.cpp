#include "ofpca/simgen.hpp"

#include <cmath>

#include "ofpca/rng.hpp"

namespace ofpca {

SimTruth SimTruth::builtin_1d() {
  SimTruth t;
  t.name_ = "1d";
  t.dims_ = 1;
  t.eigenvalues_.resize(10);
  for (int r = 0; r < 10; ++r) t.eigenvalues_[r] = 0.4 / ((r + 1.0) * (r + 1.0));
  t.noise_sd_ = 0.5;
  t.obs_mean_ = 6.0;
  t.obs_sd_ = 2.0;  // variance 4
  return t;
}

SimTruth SimTruth::builtin_2d() {
  SimTruth t;
  t.name_ = "2d";
  t.dims_ = 2;
  t.eigenvalues_.resize(6);
  for (int r = 0; r < 6; ++r) t.eigenvalues_[r] = std::pow(2.0, -r);
  t.noise_sd_ = 0.2;
  t.obs_mean_ = 25.0;
  t.obs_sd_ = std::sqrt(6.0);
  return t;
}

SimTruth SimTruth::by_name(const std::string& name) {
  std::string key = name;
  if (key.rfind("builtin:", 0) == 0) key = key.substr(8);
  if (key == "1d") return builtin_1d();
  if (key == "2d") return builtin_2d();
  throw ConfigError("unknown simulation setting \"" + name + "\"");
}

double SimTruth::eigenfunction(int r, const Vector& t) const {
  if (r < 0 || r >= components())
    throw ConfigError("eigenfunction index out of range");
  if (t.size() != dims_) throw ConfigError("point dimension mismatch");
  if (dims_ == 1) {
    if (r == 0) return 1.0;
    return std::sqrt(2.0) * std::cos(r * M_PI * t[0]);
  }
  // r = 3 (k1 - 1) + k2 with k1 in {1,2}, k2 in {1,2,3} (1-based).
  const int k1 = r / 3 + 1;
  const int k2 = r % 3 + 1;
  return 2.0 * std::cos(k1 * M_PI * t[0]) * std::cos(k2 * M_PI * t[1]);
}

SimData generate(const SimTruth& truth, long n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("subject count must be >= 1");
  const int d = truth.dims();
  const int n_comp = truth.components();

  SimData data;
  data.truth = truth;
  data.subjects.reserve(n);
  data.scores.resize(n, n_comp);
  data.noiseless.reserve(n);

  for (long i = 0; i < n; ++i) {
    PhiloxRng rng(seed, static_cast<std::uint64_t>(i) + 1);
    const double m_raw = truth.obs_mean() + truth.obs_sd() * rng.normal();
    const long m = std::max<long>(1, std::lround(m_raw));

    for (int r = 0; r < n_comp; ++r)
      data.scores(i, r) = std::sqrt(truth.eigenvalues()[r]) * rng.normal();

    Subject s;
    s.id = "s" + std::to_string(i + 1);
    s.locations.resize(m, d);
    s.values.resize(m);
    Vector clean(m);
    for (long j = 0; j < m; ++j) {
      for (int c = 0; c < d; ++c) s.locations(j, c) = rng.uniform();
      double x = 0.0;
      for (int r = 0; r < n_comp; ++r)
        x += data.scores(i, r) *
             truth.eigenfunction(r, s.locations.row(j).transpose());
      clean[j] = x;
      s.values[j] = x + truth.noise_sd() * rng.normal();
    }
    data.noiseless.push_back(std::move(clean));
    data.subjects.push_back(std::move(s));
  }
  return data;
}

SimData gen_1d(long n, std::uint64_t seed) {
  return generate(SimTruth::builtin_1d(), n, seed);
}

SimData gen_2d(long n, std::uint64_t seed) {
  return generate(SimTruth::builtin_2d(), n, seed);
}

}  // namespace ofpca
