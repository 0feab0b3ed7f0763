#include "ofpca/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ofpca {

namespace {

// Gauss-Legendre nodes and weights on [-1, 1], Newton iteration on the
// Legendre recurrence.
void gauss_legendre(int n, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double p0 = 1.0, p1 = 0.0, dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      p0 = 1.0;
      p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2 * j + 1) * t * p1 - j * p2) / (j + 1);
      }
      dp = n * (t * p0 - p1) / (t * t - 1.0);
      const double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    nodes[i] = -t;
    nodes[n - 1 - i] = t;
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    weights[i] = w;
    weights[n - 1 - i] = w;
  }
}

}  // namespace

MarginalSpline::MarginalSpline(Interval domain, int inner_knots, int degree)
    : domain_(domain), degree_(degree) {
  if (degree < 0) throw ConfigError("spline degree must be non-negative");
  if (inner_knots < 0) throw ConfigError("inner knot count must be non-negative");
  if (!(domain.hi > domain.lo))
    throw ConfigError("spline domain interval is empty or inverted");

  size_ = inner_knots + degree + 1;
  knots_.reserve(size_ + degree + 1);
  for (int i = 0; i <= degree; ++i) knots_.push_back(domain.lo);
  const double width = domain.hi - domain.lo;
  for (int i = 1; i <= inner_knots; ++i)
    knots_.push_back(domain.lo + width * i / (inner_knots + 1));
  for (int i = 0; i <= degree; ++i) knots_.push_back(domain.hi);

  build_grams();
}

int MarginalSpline::find_span(double t) const {
  const int last = size_ - 1;
  if (t >= knots_[last + 1]) return last;
  if (t <= knots_[degree_]) return degree_;
  int lo = degree_, hi = last + 1;
  int mid = (lo + hi) / 2;
  while (t < knots_[mid] || t >= knots_[mid + 1]) {
    if (t < knots_[mid])
      hi = mid;
    else
      lo = mid;
    mid = (lo + hi) / 2;
  }
  return mid;
}

void MarginalSpline::basis_funs(int span, double t, double* values) const {
  std::vector<double> left(degree_ + 1), right(degree_ + 1);
  values[0] = 1.0;
  for (int j = 1; j <= degree_; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    values[j] = saved;
  }
}

void MarginalSpline::basis_derivs(int span, double t, int order,
                                  Matrix& ders) const {
  const int p = degree_;
  Matrix ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = t - knots_[span + 1 - j];
    right[j] = knots_[span + j] - t;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      ndu(j, r) = right[r + 1] + left[j - r];
      const double temp = ndu(r, j - 1) / ndu(j, r);
      ndu(r, j) = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    ndu(j, j) = saved;
  }

  ders.setZero(order + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);

  Matrix a(2, p + 1);
  for (int r = 0; r <= p; ++r) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int k = 1; k <= order; ++k) {
      double d = 0.0;
      const int rk = r - k;
      const int pk = p - k;
      if (r >= k) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = (rk >= -1) ? 1 : -rk;
      const int j2 = (r - 1 <= pk) ? k - 1 : p - r;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (r <= pk) {
        a(s2, k) = -a(s1, k - 1) / ndu(pk + 1, r);
        d += a(s2, k) * ndu(r, pk);
      }
      ders(k, r) = d;
      std::swap(s1, s2);
    }
  }

  double factor = p;
  for (int k = 1; k <= order; ++k) {
    for (int j = 0; j <= p; ++j) ders(k, j) *= factor;
    factor *= (p - k);
  }
}

Vector MarginalSpline::eval(double t) const {
  if (!contains(t))
    throw DataError("point " + std::to_string(t) + " outside domain [" +
                    std::to_string(domain_.lo) + ", " +
                    std::to_string(domain_.hi) + "]");
  const int span = find_span(t);
  std::vector<double> values(degree_ + 1);
  basis_funs(span, t, values.data());
  Vector out = Vector::Zero(size_);
  for (int j = 0; j <= degree_; ++j) out[span - degree_ + j] = values[j];
  return out;
}

Vector MarginalSpline::eval_derivative2(double t) const {
  if (degree_ < 2)
    throw ConfigError("second derivatives require spline degree >= 2");
  if (!contains(t)) throw DataError("point outside domain");
  const int span = find_span(t);
  Matrix ders;
  basis_derivs(span, t, 2, ders);
  Vector out = Vector::Zero(size_);
  for (int j = 0; j <= degree_; ++j) out[span - degree_ + j] = ders(2, j);
  return out;
}

const Matrix& MarginalSpline::derivative2_gram() const {
  if (!has_d2_)
    throw ConfigError("roughness penalty requires spline degree >= 2");
  return d2_gram_;
}

void MarginalSpline::build_grams() {
  // degree+2 nodes: exact for products of two basis functions (and their
  // second derivatives) on each inter-knot interval.
  const int n_nodes = degree_ + 2;
  std::vector<double> nodes, weights;
  gauss_legendre(n_nodes, nodes, weights);

  gram_.setZero(size_, size_);
  has_d2_ = degree_ >= 2;
  if (has_d2_) d2_gram_.setZero(size_, size_);

  std::vector<double> values(degree_ + 1);
  Matrix ders;
  for (int span = degree_; span < size_; ++span) {
    const double a = knots_[span];
    const double b = knots_[span + 1];
    if (!(b > a)) continue;
    for (int g = 0; g < n_nodes; ++g) {
      const double t = a + (nodes[g] + 1.0) * 0.5 * (b - a);
      const double w = weights[g] * 0.5 * (b - a);
      basis_funs(span, t, values.data());
      for (int r = 0; r <= degree_; ++r)
        for (int c = 0; c <= degree_; ++c)
          gram_(span - degree_ + r, span - degree_ + c) +=
              w * values[r] * values[c];
      if (has_d2_) {
        basis_derivs(span, t, 2, ders);
        for (int r = 0; r <= degree_; ++r)
          for (int c = 0; c <= degree_; ++c)
            d2_gram_(span - degree_ + r, span - degree_ + c) +=
                w * ders(2, r) * ders(2, c);
      }
    }
  }
  // Exact symmetry, independent of accumulation order.
  gram_ = ((gram_ + gram_.transpose()) * 0.5).eval();
  if (has_d2_) d2_gram_ = ((d2_gram_ + d2_gram_.transpose()) * 0.5).eval();
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

namespace {

Vector kronecker_vec(const Vector& a, const Vector& b) {
  Vector out(a.size() * b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    out.segment(i * b.size(), b.size()) = a[i] * b;
  return out;
}

}  // namespace

SplineSpace::SplineSpace(std::vector<Interval> domain,
                         std::vector<int> inner_knots,
                         std::vector<int> degrees)
    : domain_(std::move(domain)) {
  const int d = static_cast<int>(domain_.size());
  if (d == 0) throw ConfigError("spline space needs at least one dimension");
  if (static_cast<int>(inner_knots.size()) != d ||
      static_cast<int>(degrees.size()) != d)
    throw ConfigError("domain, inner-knot and degree lists must agree");

  marginals_.reserve(d);
  for (int j = 0; j < d; ++j) {
    marginals_.emplace_back(domain_[j], inner_knots[j], degrees[j]);
    size_ *= marginals_.back().size();
  }

  gram_ = marginals_[0].gram();
  for (int j = 1; j < d; ++j) gram_ = kronecker(gram_, marginals_[j].gram());

  has_penalty_ = std::all_of(marginals_.begin(), marginals_.end(),
                             [](const MarginalSpline& m) {
                               return m.degree() >= 2;
                             });
  if (has_penalty_) {
    penalty_.setZero(size_, size_);
    for (int j = 0; j < d; ++j) {
      Matrix term = (j == 0) ? marginals_[0].derivative2_gram()
                             : marginals_[0].gram();
      for (int l = 1; l < d; ++l)
        term = kronecker(term, l == j ? marginals_[l].derivative2_gram()
                                      : marginals_[l].gram());
      penalty_ += term;
    }
  }
}

SplineSpace SplineSpace::make(std::vector<Interval> domain,
                              std::vector<int> inner_knots, int degree) {
  std::vector<int> degrees(domain.size(), degree);
  return SplineSpace(std::move(domain), std::move(inner_knots),
                     std::move(degrees));
}

bool SplineSpace::in_domain(const Vector& t) const {
  if (t.size() != dims()) return false;
  for (int j = 0; j < dims(); ++j)
    if (!marginals_[j].contains(t[j])) return false;
  return true;
}

Vector SplineSpace::eval_basis(const Vector& t) const {
  if (t.size() != dims())
    throw DataError("point dimension " + std::to_string(t.size()) +
                    " does not match domain dimension " +
                    std::to_string(dims()));
  Vector out = marginals_[0].eval(t[0]);
  for (int j = 1; j < dims(); ++j)
    out = kronecker_vec(out, marginals_[j].eval(t[j]));
  return out;
}

Matrix SplineSpace::basis_matrix(const Matrix& locations) const {
  if (locations.cols() != dims())
    throw DataError("location matrix has " + std::to_string(locations.cols()) +
                    " columns, expected " + std::to_string(dims()));
  Matrix out(locations.rows(), size_);
  for (Eigen::Index i = 0; i < locations.rows(); ++i) {
    try {
      out.row(i) = eval_basis(locations.row(i).transpose()).transpose();
    } catch (const DataError& e) {
      throw DataError("row " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

const Matrix& SplineSpace::penalty() const {
  if (!has_penalty_)
    throw ConfigError("roughness penalty requires all marginal degrees >= 2");
  return penalty_;
}

}  // namespace ofpca
