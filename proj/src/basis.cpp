#include "nestgam/basis.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "nestgam/error.hpp"

namespace nestgam {

SplineBasis::SplineBasis(double lo, double hi, int n_basis, int degree)
    : degree_(degree), n_basis_(n_basis), lo_(lo), hi_(hi) {
  require(degree >= 0, "spline degree must be non-negative");
  require(n_basis > degree, "n_basis must exceed the degree");
  require(std::isfinite(lo) && std::isfinite(hi) && hi > lo, "spline boundary must be a finite increasing pair");
  const int segments = n_basis - degree;
  const double h = (hi - lo) / segments;
  knots_.resize(n_basis + degree + 1);
  for (int i = 0; i < knots_.size(); ++i) knots_(i) = lo + (i - degree) * h;
}

Eigen::MatrixXd SplineBasis::eval_point(double x, int max_order) const {
  require(std::isfinite(x), "basis evaluation at a non-finite point", ErrorCode::Numeric);
  require(max_order >= 0 && max_order <= 4, "derivative order must lie in 0..4");
  const int nk = static_cast<int>(knots_.size());
  const auto& t = knots_;
  // table[k] holds the degree-k basis over indices 0..nk-2-k
  std::vector<std::vector<double>> table(degree_ + 1);
  table[0].assign(nk - 1, 0.0);
  for (int i = 0; i < nk - 1; ++i)
    if (t(i) <= x && x < t(i + 1)) table[0][i] = 1.0;
  for (int k = 1; k <= degree_; ++k) {
    table[k].assign(nk - 1 - k, 0.0);
    for (int i = 0; i < nk - 1 - k; ++i) {
      double v = 0.0;
      const double d1 = t(i + k) - t(i), d2 = t(i + k + 1) - t(i + 1);
      if (d1 > 0) v += (x - t(i)) / d1 * table[k - 1][i];
      if (d2 > 0) v += (t(i + k + 1) - x) / d2 * table[k - 1][i + 1];
      table[k][i] = v;
    }
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(max_order + 1, n_basis_);
  for (int i = 0; i < n_basis_; ++i) out(0, i) = table[degree_][i];
  // deriv[r][k][i]: r-th derivative of degree-k basis i
  std::vector<std::vector<std::vector<double>>> deriv(max_order + 1, std::vector<std::vector<double>>(degree_ + 1));
  for (int k = 0; k <= degree_; ++k) deriv[0][k] = table[k];
  for (int r = 1; r <= max_order; ++r) {
    for (int k = 0; k <= degree_; ++k) {
      deriv[r][k].assign(nk - 1 - k, 0.0);
      if (k < r) continue;
      for (int i = 0; i < nk - 1 - k; ++i) {
        double v = 0.0;
        const double d1 = t(i + k) - t(i), d2 = t(i + k + 1) - t(i + 1);
        if (d1 > 0) v += deriv[r - 1][k - 1][i] / d1;
        if (d2 > 0) v -= deriv[r - 1][k - 1][i + 1] / d2;
        deriv[r][k][i] = k * v;
      }
    }
    for (int i = 0; i < n_basis_; ++i) out(r, i) = deriv[r][degree_][i];
  }
  return out;
}

Eigen::MatrixXd SplineBasis::eval(const Eigen::VectorXd& x, int deriv_order) const {
  require(deriv_order >= 0 && deriv_order <= 4, "derivative order must lie in 0..4");
  Eigen::MatrixXd out(x.size(), n_basis_);
  for (int i = 0; i < x.size(); ++i) out.row(i) = eval_point(x(i), deriv_order).row(deriv_order);
  return out;
}

PenaltyMatrix difference_penalty(int order, int k) {
  require(order >= 1, "difference order must be at least 1");
  require(k > order, "difference penalty needs k > order, got k=" + std::to_string(k));
  Eigen::MatrixXd D = Eigen::MatrixXd::Identity(k, k);
  for (int r = 0; r < order; ++r) {
    Eigen::MatrixXd Dn(D.rows() - 1, k);
    for (int i = 0; i < D.rows() - 1; ++i) Dn.row(i) = D.row(i + 1) - D.row(i);
    D = Dn;
  }
  PenaltyMatrix p;
  p.order = order;
  p.matrix = D.transpose() * D;
  p.null_dim = order;
  return p;
}

KnotRange extreme_knots(double pi_bound, double c) {
  require(pi_bound > 0.0 && pi_bound <= 1.0, "pi_bound must lie in (0, 1]");
  require(c > 0.0, "target variance c must be positive");
  KnotRange r;
  r.xi = std::sqrt((2.0 - pi_bound) / pi_bound);
  r.hi = r.xi * std::sqrt(c);
  r.lo = -r.hi;
  r.new_obs_bound = pi_bound / (2.0 - pi_bound);
  return r;
}

double pi_from_xi(double xi) {
  require(xi > 0.0, "xi must be positive");
  return 2.0 / (xi * xi + 1.0);
}

double new_obs_bound_finite(double xi, int n) {
  require(n >= 1, "n must be positive");
  const double m = n;
  return std::floor((m + 2.0) / (m + 1.0) * (m / (xi * xi) + 1.0)) / (m + 2.0);
}

int max_outside_count(double pi_bound, int n) {
  require(pi_bound > 0.0 && pi_bound <= 1.0, "pi_bound must lie in (0, 1]");
  return static_cast<int>(std::floor(pi_bound * n));
}

Eigen::MatrixXd null_space_map(const Eigen::MatrixXd& C, double rel_tol) {
  const int k = static_cast<int>(C.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * smax) ++rank;
  return svd.matrixV().rightCols(k - rank);
}

ConstrainedOuterBasis::ConstrainedOuterBasis(const SplineBasis& inner) : inner_(inner) {
  require(inner.degree() >= 6, "outer nested-effect basis needs degree >= 6");
  require(inner.lo() < 0.0 && inner.hi() > 0.0, "outer basis boundary must contain 0");
  const int k = inner.n_basis();
  require(k > 7, "outer basis needs more than 7 functions to leave free coefficients");
  Eigen::MatrixXd C(7, k);
  C.row(0) = inner.eval_point(0.0, 0).row(0);
  const Eigen::MatrixXd lo = inner.eval_point(inner.lo(), 4);
  const Eigen::MatrixXd hi = inner.eval_point(inner.hi(), 4);
  for (int r = 2; r <= 4; ++r) {
    C.row(r - 1) = lo.row(r);
    C.row(r + 2) = hi.row(r);
  }
  // scale rows so the rank decision is insensitive to knot spacing
  for (int i = 0; i < 7; ++i) C.row(i) /= C.row(i).norm();
  map_ = null_space_map(C);
  require(map_.cols() == k - 7, "outer constraint matrix is rank deficient", ErrorCode::Numeric);
  lo_rows_ = lo.topRows(2) * map_;
  hi_rows_ = hi.topRows(2) * map_;
}

Eigen::MatrixXd ConstrainedOuterBasis::eval(const Eigen::VectorXd& x, int deriv_order) const {
  require(deriv_order >= 0 && deriv_order <= 4, "derivative order must lie in 0..4");
  const int q = dim();
  Eigen::MatrixXd out(x.size(), q);
  for (int i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    require(std::isfinite(xi), "basis evaluation at a non-finite point", ErrorCode::Numeric);
    if (xi < inner_.lo() || xi > inner_.hi()) {
      const bool below = xi < inner_.lo();
      const Eigen::MatrixXd& b = below ? lo_rows_ : hi_rows_;
      const double d = xi - (below ? inner_.lo() : inner_.hi());
      if (deriv_order == 0)
        out.row(i) = b.row(0) + d * b.row(1);
      else if (deriv_order == 1)
        out.row(i) = b.row(1);
      else
        out.row(i).setZero();
    } else {
      out.row(i) = inner_.eval_point(xi, deriv_order).row(deriv_order) * map_;
    }
  }
  return out;
}

ConstrainedOuterBasis constrain_outer(const SplineBasis& basis) { return ConstrainedOuterBasis(basis); }

}  // namespace nestgam
