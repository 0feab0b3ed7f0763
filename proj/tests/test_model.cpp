#include <cmath>

#include "doctest.h"
#include "ofpca/model.hpp"
#include "ofpca/rng.hpp"

using namespace ofpca;

namespace {

Matrix random_matrix(int rows, int cols, PhiloxRng& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

SplineSpace small_space() {
  // p = 5 cubic basis functions.
  return SplineSpace::make({{0.0, 1.0}}, {1}, 3);
}

ModelParams random_params(const SplineSpace& space, int rank, PhiloxRng& rng,
                          double var_floor = 1e-4) {
  const StiefelGeometry geom(space.gram());
  ModelParams params;
  params.coef = geom.orthonormalize(random_matrix(space.size(), rank, rng));
  params.eigenvalues = Vector(rank);
  for (int r = 0; r < rank; ++r)
    params.eigenvalues[r] = 0.3 + 0.5 * rng.uniform();
  params.noise_var = 0.2 + 0.3 * rng.uniform();
  params.var_floor = var_floor;
  return params;
}

Subject random_subject(const SplineSpace& space, int m, PhiloxRng& rng,
                       const std::string& id = "s") {
  Subject s;
  s.id = id;
  s.locations = Matrix(m, space.dims());
  s.values = Vector(m);
  for (int j = 0; j < m; ++j) {
    for (int c = 0; c < space.dims(); ++c) s.locations(j, c) = rng.uniform();
    s.values[j] = rng.normal();
  }
  return s;
}

// Loss as a function of the raw parameter blocks, for finite differences.
double loss_at(const std::vector<Subject>& subjects, const SplineSpace& space,
               const Matrix& coef, const Vector& log_eigen, double log_noise,
               double var_floor, double tau) {
  const StiefelGeometry geom(space.gram());
  ModelParams params;
  params.coef = StiefelPoint{coef, 0.0};  // residual unused by the loss
  params.eigenvalues = ModelParams::eigen_from_log(log_eigen, var_floor);
  params.noise_var = std::exp(log_noise) + var_floor;
  params.var_floor = var_floor;
  return loss_batch(subjects, space, params, tau);
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("scalar covariance assembly") {
  const SplineSpace space = small_space();
  const StiefelGeometry geom(space.gram());
  PhiloxRng rng(31, 1);

  ModelParams params = random_params(space, 1, rng);
  params.eigenvalues[0] = 1.0;
  params.noise_var = 1.0;
  // One observation with basis row scaled so that (B coef) = 1.
  Matrix basis(1, space.size());
  Vector pt(1);
  pt << 0.4;
  basis.row(0) = space.eval_basis(pt).transpose();
  const double u = (basis * params.coef.theta)(0, 0);
  basis /= u;
  const Matrix sigma = assemble_sigma(basis, params);
  CHECK(sigma.rows() == 1);
  CHECK(sigma(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("floored variances keep the covariance near the noise ridge") {
  const SplineSpace space = small_space();
  PhiloxRng rng(32, 1);
  ModelParams params = random_params(space, 2, rng);
  params.eigenvalues.setConstant(params.var_floor);
  const Subject s = random_subject(space, 4, rng);
  const Matrix basis = space.basis_matrix(s.locations);
  const Matrix u = basis * params.coef.theta;
  const Matrix sigma = assemble_sigma(basis, params);
  const Matrix expected = params.noise_var * Matrix::Identity(4, 4) +
                          params.var_floor * u * u.transpose();
  CHECK((sigma - expected).norm() < 1e-12);
}

TEST_CASE("covariance eigenvalues are bounded below by the noise variance") {
  const SplineSpace space = small_space();
  PhiloxRng rng(33, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams params = random_params(space, 2, rng);
    const Subject s = random_subject(space, 5, rng);
    const Matrix sigma =
        assemble_sigma(space.basis_matrix(s.locations), params);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    CHECK(eig.eigenvalues().minCoeff() >= params.noise_var - 1e-12);
  }
}

TEST_CASE("scalar subject loss") {
  const SplineSpace space = small_space();
  const StiefelGeometry geom(space.gram());
  PhiloxRng rng(34, 1);
  ModelParams params = random_params(space, 1, rng);

  // Choose the value so that Sigma = (2): y^2/2 + ln 2.
  Subject s;
  s.id = "scalar";
  s.locations = Matrix(1, 1);
  s.locations(0, 0) = 0.3;
  s.values = Vector(1);
  s.values[0] = 2.0;
  const Vector b = space.eval_basis(s.locations.row(0).transpose());
  const double u = b.dot(params.coef.theta.col(0));
  params.eigenvalues[0] = (2.0 - 0.5) / (u * u);
  params.noise_var = 0.5;
  CHECK(loss_subject(s, space, params) ==
        doctest::Approx(4.0 / 2.0 + std::log(2.0)));

  // Zero observation: only the log determinant remains.
  s.values[0] = 0.0;
  CHECK(loss_subject(s, space, params) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("subject loss matches a dense-inverse oracle") {
  const SplineSpace space = small_space();
  PhiloxRng rng(35, 1);
  for (int trial = 0; trial < 10; ++trial) {
    const ModelParams params = random_params(space, 2, rng);
    const Subject s = random_subject(space, 5, rng);
    const Matrix sigma =
        assemble_sigma(space.basis_matrix(s.locations), params);
    const Matrix inv = sigma.inverse();
    const double oracle = (inv * s.values * s.values.transpose()).trace() +
                          std::log(sigma.determinant());
    const double got = loss_subject(s, space, params);
    CHECK(std::abs(got - oracle) / std::abs(oracle) < 1e-10);
  }
}

TEST_CASE("batch loss averages and penalizes") {
  const SplineSpace space = small_space();
  PhiloxRng rng(36, 1);
  const ModelParams params = random_params(space, 2, rng);
  const Subject a = random_subject(space, 3, rng, "a");
  const Subject b = random_subject(space, 4, rng, "b");

  const std::vector<Subject> one{a};
  const std::vector<Subject> two{a, b};
  const std::vector<Subject> dup{a, a};
  const std::vector<Subject> swapped{b, a};

  CHECK(loss_batch(one, space, params, 0.0) ==
        doctest::Approx(loss_subject(a, space, params)));
  CHECK(loss_batch(dup, space, params, 0.0) ==
        doctest::Approx(loss_subject(a, space, params)));
  CHECK(loss_batch(two, space, params, 0.0) ==
        doctest::Approx(loss_batch(swapped, space, params, 0.0)));

  const double tau = 0.37;
  const double penalty =
      tau *
      (params.coef.theta.transpose() * space.penalty() * params.coef.theta)
          .trace();
  CHECK(loss_batch(two, space, params, tau) ==
        doctest::Approx(loss_batch(two, space, params, 0.0) + penalty));

  CHECK_THROWS_AS(loss_batch({}, space, params, 0.0), ConfigError);
}

TEST_CASE("stationary construction zeroes the data gradients") {
  // Scalar subjects with y^2 = sigma so that C = Sigma exactly.
  const SplineSpace space = small_space();
  PhiloxRng rng(37, 1);
  const ModelParams params = random_params(space, 2, rng);

  std::vector<Subject> subjects;
  for (int i = 0; i < 3; ++i) {
    Subject s = random_subject(space, 1, rng, "s" + std::to_string(i));
    const Matrix sigma =
        assemble_sigma(space.basis_matrix(s.locations), params);
    s.values[0] = std::sqrt(sigma(0, 0));
    subjects.push_back(std::move(s));
  }

  const EuclideanGrads grads = grads_batch(subjects, space, params, 0.0);
  CHECK(grads.d_coef.norm() < 1e-10);
  CHECK(grads.d_log_eigen.norm() < 1e-10);
  CHECK(std::abs(grads.d_log_noise) < 1e-10);

  // With a penalty the coefficient gradient is exactly the penalty term.
  const double tau = 0.21;
  const EuclideanGrads with_penalty = grads_batch(subjects, space, params, tau);
  const Matrix expected = 2.0 * tau * space.penalty() * params.coef.theta;
  CHECK((with_penalty.d_coef - expected).norm() < 1e-10);
}

TEST_CASE("eigenvalues at the floor freeze their log gradient") {
  const SplineSpace space = small_space();
  PhiloxRng rng(38, 1);
  ModelParams params = random_params(space, 2, rng);
  params.eigenvalues[1] = params.var_floor;  // log-excess factor is zero
  const Subject s = random_subject(space, 4, rng);
  const std::vector<Subject> batch{s};
  const EuclideanGrads grads = grads_batch(batch, space, params, 0.0);
  CHECK(grads.d_log_eigen[1] == 0.0);
}

TEST_CASE("analytic gradients match central finite differences") {
  const SplineSpace space = small_space();
  const int p = space.size();
  const int rank = 2;
  const double step = 1e-5;
  PhiloxRng rng(39, 1);

  double worst = 0.0;
  for (int instance = 0; instance < 20; ++instance) {
    const ModelParams params = random_params(space, rank, rng);
    std::vector<Subject> subjects;
    const int n_subjects = 2 + static_cast<int>(rng.uniform() * 3);
    for (int i = 0; i < n_subjects; ++i) {
      const int m = 1 + static_cast<int>(rng.uniform() * 6);
      subjects.push_back(
          random_subject(space, std::min(m, 6), rng, "s" + std::to_string(i)));
    }
    const double tau = instance % 2 == 0 ? 0.0 : 0.05;

    const EuclideanGrads grads = grads_batch(subjects, space, params, tau);
    const Matrix coef = params.coef.theta;
    const Vector log_eigen = params.log_eigen();
    const double log_noise = params.log_noise();

    auto rel_err = [&](double analytic, double fd) {
      return std::abs(analytic - fd) /
             std::max({1.0, std::abs(analytic), std::abs(fd)});
    };

    for (int i = 0; i < p; ++i)
      for (int j = 0; j < rank; ++j) {
        Matrix up = coef, down = coef;
        up(i, j) += step;
        down(i, j) -= step;
        const double fd =
            (loss_at(subjects, space, up, log_eigen, log_noise,
                     params.var_floor, tau) -
             loss_at(subjects, space, down, log_eigen, log_noise,
                     params.var_floor, tau)) /
            (2.0 * step);
        worst = std::max(worst, rel_err(grads.d_coef(i, j), fd));
      }
    for (int r = 0; r < rank; ++r) {
      Vector up = log_eigen, down = log_eigen;
      up[r] += step;
      down[r] -= step;
      const double fd =
          (loss_at(subjects, space, coef, up, log_noise, params.var_floor,
                   tau) -
           loss_at(subjects, space, coef, down, log_noise, params.var_floor,
                   tau)) /
          (2.0 * step);
      worst = std::max(worst, rel_err(grads.d_log_eigen[r], fd));
    }
    const double fd_noise =
        (loss_at(subjects, space, coef, log_eigen, log_noise + step,
                 params.var_floor, tau) -
         loss_at(subjects, space, coef, log_eigen, log_noise - step,
                 params.var_floor, tau)) /
        (2.0 * step);
    worst = std::max(worst, rel_err(grads.d_log_noise, fd_noise));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("initializer recovers a noiseless low-rank truth") {
  const SplineSpace space = SplineSpace::make({{0.0, 1.0}}, {5}, 3);
  const StiefelGeometry geom(space.gram());
  const int p = space.size();
  const int rank = 3;
  PhiloxRng rng(40, 1);

  const StiefelPoint truth = geom.orthonormalize(random_matrix(p, rank, rng));
  Vector lambda(rank);
  lambda << 1.0, 0.5, 0.25;

  std::vector<Subject> subjects;
  for (int i = 0; i < 150; ++i) {
    Subject s;
    s.id = "s" + std::to_string(i);
    const int m = 30;
    s.locations = Matrix(m, 1);
    s.values = Vector(m);
    Vector scores(rank);
    for (int r = 0; r < rank; ++r)
      scores[r] = std::sqrt(lambda[r]) * rng.normal();
    const Vector coef_i = truth.theta * scores;
    for (int j = 0; j < m; ++j) {
      s.locations(j, 0) = rng.uniform();
      s.values[j] =
          coef_i.dot(space.eval_basis(s.locations.row(j).transpose()));
    }
    subjects.push_back(std::move(s));
  }

  const ModelParams init = batch_init(subjects, space, rank, 1e-6, 1e-4);
  CHECK(init.coef.residual < 1e-8);
  for (int r = 1; r < rank; ++r)
    CHECK(init.eigenvalues[r] <= init.eigenvalues[r - 1]);

  // Principal angles between the fitted and true spans in the G geometry.
  Eigen::LLT<Matrix> llt(space.gram());
  const Matrix white_truth = llt.matrixL().transpose() * truth.theta;
  const Matrix white_fit = llt.matrixL().transpose() * init.coef.theta;
  Eigen::JacobiSVD<Matrix> svd(white_truth.transpose() * white_fit);
  for (int r = 0; r < rank; ++r) {
    const double cosine = std::min(1.0, svd.singularValues()[r]);
    CHECK(std::acos(cosine) < 1e-3);
  }
}

TEST_CASE("initializer rejects starved inputs") {
  const SplineSpace space = SplineSpace::make({{0.0, 1.0}}, {5}, 3);
  PhiloxRng rng(41, 1);
  std::vector<Subject> subjects{random_subject(space, 3, rng)};
  CHECK_THROWS_AS(batch_init(subjects, space, 2, 1e-4, 1e-4), DataError);
  CHECK_THROWS_AS(batch_init({}, space, 2, 1e-4, 1e-4), DataError);
  std::vector<Subject> enough;
  for (int i = 0; i < 5; ++i) enough.push_back(random_subject(space, 4, rng));
  CHECK_THROWS_AS(batch_init(enough, space, 20, 1e-4, 1e-4), ConfigError);
}

TEST_CASE("descent along the negative gradient lowers a frozen batch loss") {
  const SplineSpace space = small_space();
  const StiefelGeometry geom(space.gram());
  PhiloxRng rng(42, 1);
  ModelParams params = random_params(space, 2, rng);

  std::vector<Subject> subjects;
  for (int i = 0; i < 10; ++i)
    subjects.push_back(random_subject(space, 5, rng, "s" + std::to_string(i)));
  const auto designs = make_designs(subjects, space);
  std::vector<int> batch(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i)
    batch[i] = static_cast<int>(i);

  const double start =
      eval_design_batch(designs, batch, space, params, 0.0, false).data_loss;
  double current = start;
  for (int step = 0; step < 100; ++step) {
    const BatchEval ev =
        eval_design_batch(designs, batch, space, params, 0.0, true);
    const Matrix direction = geom.riemannian_grad(params.coef, ev.grads.d_coef);
    params.coef = geom.retract(params.coef, direction, -0.01);
    const Vector log_eigen =
        params.log_eigen() - 0.01 * ev.grads.d_log_eigen;
    params.eigenvalues =
        ModelParams::eigen_from_log(log_eigen, params.var_floor);
    params.noise_var =
        std::exp(params.log_noise() - 0.01 * ev.grads.d_log_noise) +
        params.var_floor;
    current =
        eval_design_batch(designs, batch, space, params, 0.0, false).data_loss;
  }
  CHECK(current < start);
}

TEST_SUITE_END();
