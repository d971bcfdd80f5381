#include <doctest.h>

#include <cmath>
#include <random>

#include "nestgam/basis.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/error.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;

TEST_CASE("partition of unity and its derivative") {
  const SplineBasis b(0.0, 1.0, 8, 3);
  Eigen::VectorXd x(1);
  x << 0.37;
  CHECK(b.eval(x, 0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.001, 0.999);
  Eigen::VectorXd xs(50);
  for (int i = 0; i < 50; ++i) xs(i) = U(rng);
  const Eigen::MatrixXd B0 = b.eval(xs, 0), B1 = b.eval(xs, 1);
  for (int i = 0; i < 50; ++i) {
    CHECK(std::abs(B0.row(i).sum() - 1.0) < 1e-12);
    CHECK(std::abs(B1.row(i).sum()) < 1e-10);
  }
}

TEST_CASE("sextic second derivative matches finite differences") {
  const SplineBasis b(-1.0, 1.0, 12, 6);
  Eigen::VectorXd x(1);
  x << 0.5;
  const double h = 1e-4;
  Eigen::VectorXd xp = x.array() + h, xm = x.array() - h;
  const Eigen::MatrixXd fd = (b.eval(xp, 0) - 2 * b.eval(x, 0) + b.eval(xm, 0)) / (h * h);
  CHECK(max_rel_err(b.eval(x, 2), fd) < 1e-6);
}

TEST_CASE("derivatives to fourth order pass the oracle") {
  const CheckResult r = check_basis_fd(1e-5);
  CHECK_MESSAGE(r.pass, r.error);
}

TEST_CASE("evaluation rejects bad arguments") {
  const SplineBasis b(0.0, 1.0, 10, 6);
  Eigen::VectorXd x(1);
  x << 0.2;
  CHECK_THROWS_AS(b.eval(x, 5), Error);
  x << std::nan("");
  CHECK_THROWS_AS(b.eval(x, 0), Error);
}

TEST_CASE("extreme knots") {
  const KnotRange k = extreme_knots(0.05, 1.0);
  CHECK(k.xi == doctest::Approx(std::sqrt(1.95 / 0.05)));
  CHECK(k.lo == doctest::Approx(-k.xi));
  CHECK(k.hi == doctest::Approx(k.xi));
  CHECK(k.new_obs_bound == doctest::Approx(0.05 / 1.95));
  const KnotRange one = extreme_knots(1.0, 4.0);
  CHECK(one.xi == doctest::Approx(1.0));
  CHECK(one.hi == doctest::Approx(2.0));
  // inverse query for xi = 6
  CHECK(pi_from_xi(6.0) == doctest::Approx(2.0 / 37.0));
  const double p = pi_from_xi(6.0);
  CHECK(p / (2 - p) == doctest::Approx(0.027).epsilon(0.01));
  CHECK_THROWS_AS(extreme_knots(0.0, 1.0), Error);
  CHECK_THROWS_AS(extreme_knots(1.5, 1.0), Error);
  CHECK(max_outside_count(0.05, 1000) <= 50);
}

TEST_CASE("standardized samples respect the outside-count bound") {
  const CheckResult r = check_knot_bound(5, 200);
  CHECK_MESSAGE(r.pass, r.error);
}

TEST_CASE("difference penalties") {
  const PenaltyMatrix p2 = difference_penalty(2, 3);
  const Eigen::Vector3d lin(1, 2, 3);
  CHECK(std::abs(lin.dot(p2.matrix * lin)) < 1e-12);
  CHECK(p2.null_dim == 2);
  const PenaltyMatrix p1 = difference_penalty(1, 2);
  const Eigen::Vector2d cst(4.2, 4.2);
  CHECK(std::abs(cst.dot(p1.matrix * cst)) < 1e-12);
  const PenaltyMatrix p = difference_penalty(2, 10);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p.matrix);
  int small = 0;
  for (int i = 0; i < 10; ++i) {
    CHECK(es.eigenvalues()(i) >= -1e-12);
    small += es.eigenvalues()(i) < 1e-10;
  }
  CHECK(small == 2);
  for (int order = 1; order <= 3; ++order) {
    const PenaltyMatrix q = difference_penalty(order, 9);
    for (int deg = 0; deg < order; ++deg) {
      Eigen::VectorXd poly(9);
      for (int i = 0; i < 9; ++i) poly(i) = std::pow(i - 4.0, deg);
      CHECK(std::abs(poly.dot(q.matrix * poly)) < 1e-12);
    }
  }
  CHECK_THROWS_AS(difference_penalty(3, 3), Error);
}

TEST_CASE("constrained outer basis") {
  const KnotRange kr = extreme_knots(0.05, 1.0);
  const ConstrainedOuterBasis ob = constrain_outer(SplineBasis(kr.lo, kr.hi, 14, 6));
  CHECK(ob.n_constraints() == 7);
  CHECK(ob.dim() == 14 - 7);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(ob.constraint_map());
  CHECK(svd.singularValues().minCoeff() > 1e-8);
  CHECK(ob.eval(Eigen::VectorXd::Zero(1), 0).cwiseAbs().maxCoeff() < 1e-12);
  Eigen::VectorXd bnd(2);
  bnd << kr.lo, kr.hi;
  for (int d = 2; d <= 4; ++d) CHECK(ob.eval(bnd, d).cwiseAbs().maxCoeff() < 1e-10);
  // exact linear continuation
  const Eigen::MatrixXd vb = ob.eval(bnd, 0), sb = ob.eval(bnd, 1);
  Eigen::VectorXd out(2);
  out << kr.lo - 1.3, kr.hi + 0.7;
  const Eigen::MatrixXd vo = ob.eval(out, 0);
  CHECK((vo.row(0) - (vb.row(0) - 1.3 * sb.row(0))).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((vo.row(1) - (vb.row(1) + 0.7 * sb.row(1))).cwiseAbs().maxCoeff() < 1e-10);
  // second central difference beyond the boundary
  const double h = 1e-3, x0 = kr.hi + 0.5;
  Eigen::VectorXd pts(3);
  pts << x0 - h, x0, x0 + h;
  const Eigen::MatrixXd B = ob.eval(pts, 0);
  CHECK(((B.row(0) - 2 * B.row(1) + B.row(2)) / (h * h)).cwiseAbs().maxCoeff() < 1e-6);
  CHECK_THROWS_AS(constrain_outer(SplineBasis(0.5, 2.0, 14, 6)), Error);
  CHECK_THROWS_AS(constrain_outer(SplineBasis(-1.0, 1.0, 14, 3)), Error);
}
