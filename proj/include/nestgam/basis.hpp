#pragma once

#include <Eigen/Dense>
#include <utility>

namespace nestgam {

/// B-spline basis on equally spaced knots. The boundary interval [lo, hi] is split
/// into n_basis - degree segments and padded with degree knots on each side.
class SplineBasis {
 public:
  SplineBasis() = default;
  SplineBasis(double lo, double hi, int n_basis, int degree);

  /// Rows are observations, columns basis functions (or their deriv_order-th derivative).
  Eigen::MatrixXd eval(const Eigen::VectorXd& x, int deriv_order = 0) const;
  /// All derivative orders 0..max_order at a single point, one row per order.
  Eigen::MatrixXd eval_point(double x, int max_order) const;

  const Eigen::VectorXd& knots() const { return knots_; }
  int degree() const { return degree_; }
  int n_basis() const { return n_basis_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  Eigen::VectorXd knots_;
  int degree_ = 0;
  int n_basis_ = 0;
  double lo_ = 0.0, hi_ = 1.0;
};

inline Eigen::MatrixXd bspline_eval(const SplineBasis& b, const Eigen::VectorXd& x, int deriv_order) {
  return b.eval(x, deriv_order);
}

struct PenaltyMatrix {
  int order = 0;
  Eigen::MatrixXd matrix;
  int null_dim = 0;
};

/// S = D'D with D the order-th difference operator on k coefficients.
PenaltyMatrix difference_penalty(int order, int k);

struct KnotRange {
  double xi = 0.0;
  double lo = 0.0, hi = 0.0;
  /// Asymptotic bound on the probability that a fresh draw falls outside [lo, hi].
  double new_obs_bound = 0.0;
};

KnotRange extreme_knots(double pi_bound, double c);
/// Inverse query: the pi implied by a given xi.
double pi_from_xi(double xi);
/// Finite-n version of the fresh-draw bound.
double new_obs_bound_finite(double xi, int n);
/// Deterministic bound on the count of standardized values outside [-xi*sqrt(c), xi*sqrt(c)].
int max_outside_count(double pi_bound, int n);

/// Orthonormal basis of the null space of C (columns), via SVD.
Eigen::MatrixXd null_space_map(const Eigen::MatrixXd& C, double rel_tol = 1e-10);

/// Outer basis of a nested effect: s(0) = 0, second to fourth derivatives zero at both
/// boundary knots, linear continuation beyond the boundary.
class ConstrainedOuterBasis {
 public:
  ConstrainedOuterBasis() = default;
  explicit ConstrainedOuterBasis(const SplineBasis& inner);

  Eigen::MatrixXd eval(const Eigen::VectorXd& x, int deriv_order = 0) const;

  const SplineBasis& inner() const { return inner_; }
  const Eigen::MatrixXd& constraint_map() const { return map_; }
  int n_constraints() const { return 7; }
  int dim() const { return static_cast<int>(map_.cols()); }

 private:
  SplineBasis inner_;
  Eigen::MatrixXd map_;
  Eigen::MatrixXd lo_rows_, hi_rows_;  // rows: value and first derivative at each boundary
};

ConstrainedOuterBasis constrain_outer(const SplineBasis& basis);

}  // namespace nestgam
