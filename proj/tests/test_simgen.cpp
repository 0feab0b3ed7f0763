#include <cmath>

#include "doctest.h"
#include "ofpca/simgen.hpp"

using namespace ofpca;

TEST_SUITE_BEGIN("simgen");

TEST_CASE("builtin designs expose the documented spectra") {
  const SimTruth one = SimTruth::builtin_1d();
  CHECK(one.dims() == 1);
  CHECK(one.components() == 10);
  CHECK(one.eigenvalues()[0] == doctest::Approx(0.4));
  CHECK(one.eigenvalues()[1] == doctest::Approx(0.1));
  CHECK(one.eigenvalues()[2] == doctest::Approx(0.4 / 9.0));
  CHECK(one.noise_sd() == doctest::Approx(0.5));

  const SimTruth two = SimTruth::builtin_2d();
  CHECK(two.dims() == 2);
  CHECK(two.components() == 6);
  Vector expected(6);
  expected << 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125;
  CHECK((two.eigenvalues() - expected).norm() == 0.0);
  CHECK(two.noise_sd() == doctest::Approx(0.2));

  CHECK(SimTruth::by_name("builtin:2d").dims() == 2);
  CHECK_THROWS_AS(SimTruth::by_name("3d"), ConfigError);
}

TEST_CASE("eigenfunction formulas at reference points") {
  const SimTruth one = SimTruth::builtin_1d();
  Vector t(1);
  t << 0.37;
  CHECK(one.eigenfunction(0, t) == doctest::Approx(1.0));
  CHECK(one.eigenfunction(2, t) ==
        doctest::Approx(std::sqrt(2.0) * std::cos(2.0 * M_PI * 0.37)));

  const SimTruth two = SimTruth::builtin_2d();
  Vector st(2);
  st << 0.0, 0.0;
  CHECK(two.eigenfunction(0, st) == doctest::Approx(2.0));
  st << 0.3, 0.6;
  CHECK(two.eigenfunction(3, st) ==
        doctest::Approx(2.0 * std::cos(2.0 * M_PI * 0.3) *
                        std::cos(M_PI * 0.6)));
}

TEST_CASE("1d eigenfunctions are orthonormal on a fine grid") {
  const SimTruth truth = SimTruth::builtin_1d();
  const int n = 2001;
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      double total = 0.0;
      for (int k = 0; k < n; ++k) {
        Vector t(1);
        t << static_cast<double>(k) / (n - 1);
        const double f = truth.eigenfunction(a, t) * truth.eigenfunction(b, t);
        total += (k == 0 || k == n - 1) ? 0.5 * f : f;
      }
      total /= (n - 1);
      CHECK(std::abs(total - (a == b ? 1.0 : 0.0)) < 1e-6);
    }
}

TEST_CASE("2d eigenfunctions have an identity grid gram") {
  const SimTruth truth = SimTruth::builtin_2d();
  const int n = 201;
  Matrix gram = Matrix::Zero(6, 6);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      Vector st(2);
      st << static_cast<double>(i) / (n - 1), static_cast<double>(j) / (n - 1);
      Vector phi(6);
      for (int r = 0; r < 6; ++r) phi[r] = truth.eigenfunction(r, st);
      const double w = ((i == 0 || i == n - 1) ? 0.5 : 1.0) *
                       ((j == 0 || j == n - 1) ? 0.5 : 1.0);
      gram += w * phi * phi.transpose();
    }
  gram /= static_cast<double>(n - 1) * (n - 1);
  CHECK((gram - Matrix::Identity(6, 6)).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("generation is deterministic in the seed") {
  const SimData a = gen_1d(50, 42);
  const SimData b = gen_1d(50, 42);
  REQUIRE(a.subjects.size() == b.subjects.size());
  for (std::size_t i = 0; i < a.subjects.size(); ++i) {
    CHECK(a.subjects[i].id == b.subjects[i].id);
    CHECK((a.subjects[i].locations - b.subjects[i].locations).norm() == 0.0);
    CHECK((a.subjects[i].values - b.subjects[i].values).norm() == 0.0);
  }
  CHECK((a.scores - b.scores).norm() == 0.0);

  const SimData c = gen_1d(50, 43);
  CHECK((a.subjects[0].values - c.subjects[0].values).norm() != 0.0);
}

TEST_CASE("every subject has at least one observation in the unit box") {
  const SimData data = gen_2d(300, 7);
  for (const Subject& s : data.subjects) {
    CHECK(s.values.size() >= 1);
    CHECK(s.locations.minCoeff() >= 0.0);
    CHECK(s.locations.maxCoeff() <= 1.0);
  }
}

TEST_CASE("leading score variance matches the design within Monte Carlo error") {
  const long n = 50000;
  const SimData data = gen_1d(n, 11);
  const double mean = data.scores.col(0).mean();
  const double var =
      (data.scores.col(0).array() - mean).square().sum() / (n - 1);
  const double truth = 0.4;
  const double se = truth * std::sqrt(2.0 / n);
  CHECK(std::abs(var - truth) < 3.0 * se);
}

TEST_CASE("noise variance matches the design within Monte Carlo error") {
  const long n = 20000;  // about 1.2e5 observations
  const SimData data = gen_1d(n, 13);
  double ss = 0.0;
  long count = 0;
  for (std::size_t i = 0; i < data.subjects.size(); ++i) {
    const Vector diff = data.subjects[i].values - data.noiseless[i];
    ss += diff.squaredNorm();
    count += diff.size();
  }
  const double var = ss / count;
  CHECK(std::abs(var - 0.25) / 0.25 < 0.05);
}

TEST_CASE("observation counts follow the rounded normal with clamping") {
  const SimData data = gen_1d(20000, 17);
  double mean = 0.0;
  for (const Subject& s : data.subjects) mean += s.values.size();
  mean /= data.subjects.size();
  CHECK(std::abs(mean - 6.0) < 0.15);  // clamping inflates slightly

  const SimData wide = gen_2d(2000, 17);
  double mean2 = 0.0;
  for (const Subject& s : wide.subjects) mean2 += s.values.size();
  mean2 /= wide.subjects.size();
  CHECK(std::abs(mean2 - 25.0) < 0.5);
}

TEST_CASE("generation rejects empty requests") {
  CHECK_THROWS_AS(gen_1d(0, 1), ConfigError);
}

TEST_SUITE_END();
