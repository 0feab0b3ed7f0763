#include "ofpca/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ofpca {

SubjectDesign make_design(const Subject& subject, const SplineSpace& space) {
  try {
    return SubjectDesign{space.basis_matrix(subject.locations),
                         subject.values};
  } catch (const DataError& e) {
    throw DataError("subject " + subject.id + ": " + e.what());
  }
}

std::vector<SubjectDesign> make_designs(std::span<const Subject> subjects,
                                        const SplineSpace& space) {
  std::vector<SubjectDesign> designs;
  designs.reserve(subjects.size());
  for (const Subject& s : subjects) designs.push_back(make_design(s, space));
  return designs;
}

Matrix assemble_sigma(const Matrix& basis, const ModelParams& params) {
  const Matrix u = basis * params.coef.theta;
  Matrix sigma = u * params.eigenvalues.asDiagonal() * u.transpose();
  sigma.diagonal().array() += params.noise_var;
  return 0.5 * (sigma + sigma.transpose());
}

BatchEval eval_design_batch(const std::vector<SubjectDesign>& designs,
                            std::span<const int> batch,
                            const SplineSpace& space, const ModelParams& params,
                            double tau, bool with_grads) {
  if (batch.empty()) throw ConfigError("empty mini-batch");
  const int p = space.size();
  const int r = params.rank();

  BatchEval out;
  if (with_grads) {
    out.grads.d_coef = Matrix::Zero(p, r);
    out.grads.d_log_eigen = Vector::Zero(r);
    out.grads.d_log_noise = 0.0;
  }

  for (const int idx : batch) {
    const SubjectDesign& d = designs[idx];
    const Eigen::Index m = d.values.size();
    const Matrix u = d.basis * params.coef.theta;  // m x R
    Matrix sigma = u * params.eigenvalues.asDiagonal() * u.transpose();
    sigma.diagonal().array() += params.noise_var;
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
      throw NumericalError("subject covariance is not positive definite");

    const Vector alpha = llt.solve(d.values);  // Sigma^{-1} y
    double logdet = 0.0;
    const Matrix& packed = llt.matrixLLT();
    for (Eigen::Index i = 0; i < m; ++i) logdet += std::log(packed(i, i));
    out.data_loss += d.values.dot(alpha) + 2.0 * logdet;

    if (with_grads) {
      // W = Sigma^{-1} (Sigma - y y^T) Sigma^{-1} = Sigma^{-1} - alpha alpha^T
      const Matrix w =
          llt.solve(Matrix::Identity(m, m)) - alpha * alpha.transpose();
      const Matrix wu = w * u;  // m x R
      out.grads.d_coef +=
          2.0 * d.basis.transpose() * wu * params.eigenvalues.asDiagonal();
      for (int c = 0; c < r; ++c)
        out.grads.d_log_eigen[c] += (params.eigenvalues[c] - params.var_floor) *
                                    u.col(c).dot(wu.col(c));
      out.grads.d_log_noise +=
          (params.noise_var - params.var_floor) * w.trace();
    }
  }

  const double inv_n = 1.0 / static_cast<double>(batch.size());
  out.data_loss *= inv_n;
  if (with_grads) {
    out.grads.d_coef *= inv_n;
    out.grads.d_log_eigen *= inv_n;
    out.grads.d_log_noise *= inv_n;
  }

  if (tau != 0.0) {
    const Matrix& penalty = space.penalty();
    const Matrix ptheta = penalty * params.coef.theta;
    out.penalty_term = tau * (params.coef.theta.transpose() * ptheta).trace();
    if (with_grads) out.grads.d_coef += 2.0 * tau * ptheta;
  }
  return out;
}

namespace {

std::vector<int> all_indices(std::size_t n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

}  // namespace

double loss_subject(const Subject& subject, const SplineSpace& space,
                    const ModelParams& params) {
  const std::vector<SubjectDesign> designs{make_design(subject, space)};
  const std::vector<int> batch{0};
  return eval_design_batch(designs, batch, space, params, 0.0, false)
      .data_loss;
}

double loss_batch(std::span<const Subject> batch, const SplineSpace& space,
                  const ModelParams& params, double tau) {
  const auto designs = make_designs(batch, space);
  return eval_design_batch(designs, all_indices(designs.size()), space, params,
                           tau, false)
      .loss();
}

EuclideanGrads grads_batch(std::span<const Subject> batch,
                           const SplineSpace& space, const ModelParams& params,
                           double tau) {
  const auto designs = make_designs(batch, space);
  return eval_design_batch(designs, all_indices(designs.size()), space, params,
                           tau, true)
      .grads;
}

ModelParams batch_init(std::span<const Subject> subjects,
                       const SplineSpace& space, int rank, double ridge,
                       double var_floor) {
  const int p = space.size();
  if (rank < 1 || rank > p)
    throw ConfigError("rank must be between 1 and the basis size");
  if (var_floor <= 0.0) throw ConfigError("variance floor must be positive");
  if (subjects.empty()) throw DataError("initialization needs subjects");

  long total_obs = 0;
  for (const Subject& s : subjects) total_obs += s.values.size();
  if (total_obs < p)
    throw DataError("too few observations to initialize: " +
                    std::to_string(total_obs) + " < basis size " +
                    std::to_string(p));

  Matrix moment = Matrix::Zero(p, p);
  double resid_ss = 0.0;
  for (const Subject& s : subjects) {
    const SubjectDesign d = make_design(s, space);
    Matrix normal = d.basis.transpose() * d.basis + ridge * space.gram();
    normal = 0.5 * (normal + normal.transpose());
    Eigen::LLT<Matrix> llt(normal);
    if (llt.info() != Eigen::Success)
      throw NumericalError("ridge projection system is singular");
    const Vector coef = llt.solve(d.basis.transpose() * d.values);
    moment.noalias() += coef * coef.transpose();
    resid_ss += (d.values - d.basis * coef).squaredNorm();
  }
  moment /= static_cast<double>(subjects.size());

  // Generalized eigenproblem moment v = mu G v via Cholesky whitening.
  Eigen::LLT<Matrix> gram_llt(space.gram());
  if (gram_llt.info() != Eigen::Success)
    throw NumericalError("Gram matrix is not positive definite");
  const Matrix lower = gram_llt.matrixL();
  const Matrix half = lower.triangularView<Eigen::Lower>().solve(moment);
  Matrix whitened = lower.triangularView<Eigen::Lower>()
                        .solve(half.transpose())
                        .transpose();
  whitened = 0.5 * (whitened + whitened.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(whitened);
  if (eig.info() != Eigen::Success)
    throw NumericalError("eigendecomposition failed during initialization");

  Matrix coef(p, rank);
  Vector eigenvalues(rank);
  for (int c = 0; c < rank; ++c) {
    const int src = p - 1 - c;  // descending order
    coef.col(c) = lower.transpose()
                      .triangularView<Eigen::Upper>()
                      .solve(eig.eigenvectors().col(src));
    eigenvalues[c] = std::max(eig.eigenvalues()[src], 2.0 * var_floor);
  }

  const StiefelGeometry geometry(space.gram());
  ModelParams params;
  params.coef = geometry.orthonormalize(coef);
  params.eigenvalues = eigenvalues;
  params.noise_var =
      std::max(resid_ss / static_cast<double>(total_obs), 2.0 * var_floor);
  params.var_floor = var_floor;
  return params;
}

}  // namespace ofpca
