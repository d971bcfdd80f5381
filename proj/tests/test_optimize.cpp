#include <doctest.h>

#include <boost/math/tools/minima.hpp>
#include <cmath>

#include "helpers.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/optimize.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;
using namespace testing_support;

namespace {

Eigen::VectorXd ridge_mode(const GaussianCase& c, const Eigen::VectorXd& rho) {
  const Eigen::MatrixXd A = c.X.transpose() * c.X / c.sigma2 + c.model.S_lambda(rho);
  return A.ldlt().solve(c.X.transpose() * c.y / c.sigma2);
}

}  // namespace

TEST_CASE("Newton on a quadratic problem") {
  const GaussianCase c = ridge_case(1, 150, 8, 2, 0.6);
  const Eigen::VectorXd rho = Eigen::Vector2d(0.5, -1.0);
  const Eigen::VectorXd start = Eigen::VectorXd::Constant(c.model.p, 3.0);
  const NewtonReport r = newton_map(c.model, rho, start);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK(max_rel_err(r.zeta, ridge_mode(c, rho)) < 1e-8);
  const NewtonReport again = newton_map(c.model, rho, r.zeta);
  CHECK(again.converged);
  CHECK(again.iterations == 0);
}

TEST_CASE("Newton converges on nested models and reports the gradient") {
  for (const std::string fx : {"es_si", "ks_si", "reference"}) {
    const Model m = fixture_model(fx, 2, 200);
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), 1.0);
    NewtonOptions o;
    o.tol = 1e-9;
    const NewtonReport r = newton_map(m, rho, m.initial_zeta(), o);
    CHECK_MESSAGE(r.converged, fx << ": " << r.message);
    const double L = log_posterior(m, r.zeta, rho).value;
    CHECK(gradient(m, r.zeta, rho).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, std::abs(L)) * 10);
  }
}

TEST_CASE("Newton flags non-convergence instead of inventing an optimum") {
  const Model m = fixture_model("reference", 2, 200);
  NewtonOptions o;
  o.max_iter = 1;
  const NewtonReport r = newton_map(m, Eigen::VectorXd::Zero(m.n_penalties()), m.initial_zeta(), o);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.message.empty());
}

TEST_CASE("indefinite Hessians get the minimal power-of-ten ridge") {
  Eigen::Matrix2d H;
  H << 1.0, 0.0, 0.0, -1e-3;
  const NegHessianFactor f = factor_neg_hessian(H);
  CHECK(f.tau > 1e-3);
  CHECK(f.tau <= 1e-2 * 1.0000001);
  const NegHessianFactor g = factor_neg_hessian(Eigen::Matrix2d::Identity());
  CHECK(g.tau == 0.0);
}

TEST_CASE("mode derivative") {
  const GaussianCase c = ridge_case(3, 120, 6, 2, 1.3);
  const Eigen::VectorXd rho = Eigen::Vector2d(0.1, 0.9);
  const Eigen::VectorXd zhat = ridge_mode(c, rho);
  const Eigen::MatrixXd A = c.X.transpose() * c.X / c.sigma2 + c.model.S_lambda(rho);
  for (int g = 0; g < 2; ++g) {
    const Eigen::VectorXd analytic = -A.ldlt().solve(std::exp(rho(g)) * c.model.S_embedded(g) * zhat);
    CHECK(max_rel_err(dzeta_drho(c.model, zhat, rho, g), analytic) < 1e-8);
  }
  // a mode inside the penalty null space does not move
  const GaussianCase s = smooth_case(4, 100, 10, 1.0);
  Eigen::VectorXd lin(s.model.p);
  for (int i = 0; i < s.model.p; ++i) lin(i) = 0.2 * i;
  CHECK(dzeta_drho(s.model, lin, Eigen::VectorXd::Zero(1), 0).cwiseAbs().maxCoeff() < 1e-12);
  for (const std::string fx : {"es_si", "ks_si"}) {
    const Model m = fixture_model(fx, 1, 200);
    const CheckResult r = check_dzeta_refit(m, Eigen::VectorXd::Constant(m.n_penalties(), 0.5), 1e-5);
    CHECK_MESSAGE(r.pass, fx << " " << r.error);
  }
}

TEST_CASE("LAML is exact for Gaussian models with proper penalties") {
  const CheckResult r = check_laml_exact(1e-8, 11, 20, 200);
  CHECK_MESSAGE(r.pass, r.error);
}

TEST_CASE("penalty null space enters as Mp/2 log 2pi") {
  const GaussianCase c = smooth_case(2, 100, 10, 1.0);
  const LamlEval L = laml(c.model, Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(c.model.p));
  CHECK(L.null_space_dim == 2);
  CHECK(L.null_space_term == doctest::Approx(std::log(2 * M_PI)));
  const double sum = L.log_posterior + L.half_log_det_S + L.neg_half_log_det_H + L.null_space_term;
  CHECK(L.value == doctest::Approx(sum).epsilon(1e-14));
}

TEST_CASE("pseudo-determinant gradient") {
  const Model m = fixture_model("reference", 1, 100);
  const Eigen::VectorXd rho = Eigen::VectorXd::LinSpaced(m.n_penalties(), -1.0, 2.0);
  const PenaltyLogDet d = penalty_log_det(m, rho);
  const ScalarFn f = [&](const Eigen::VectorXd& r) { return penalty_log_det(m, r).value; };
  CHECK(max_rel_err(d.gradient, fd_gradient(f, rho)) < 1e-7);
}

TEST_CASE("LAML gradient against finite differences") {
  for (const std::string fx : {"es_si", "ks_si", "es_design"}) {
    const Model m = fixture_model(fx, 1, 200);
    const CheckResult r = check_laml_gradient_fd(m, Eigen::VectorXd::Constant(m.n_penalties(), 0.8), 1e-5);
    CHECK_MESSAGE(r.pass, fx << " " << r.error);
  }
}

TEST_CASE("fitted smoothing parameter maximizes the analytic evidence") {
  GaussianCase c = ridge_case(5, 200, 10, 1, 0.7);
  const auto negev = [&](double r) {
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, r);
    return -gaussian_evidence(c.X, c.y, c.sigma2, c.model.S_lambda(rho));
  };
  const auto best = boost::math::tools::brent_find_minima(negev, -10.0, 10.0, 40);
  const FitResult fr = fit(c.model);
  CHECK(fr.converged);
  CHECK(std::abs(fr.rho(0) - best.first) < 1e-3);
}

TEST_CASE("outer trace is non-decreasing and fits are deterministic") {
  Model a = fixture_model("es_si", 4, 300);
  Model b = fixture_model("es_si", 4, 300);
  const FitResult fa = fit(a);
  const FitResult fb = fit(b);
  CHECK(fa.converged);
  for (size_t i = 1; i < fa.trace.size(); ++i) CHECK(fa.trace[i].laml >= fa.trace[i - 1].laml);
  CHECK((fa.zeta.array() == fb.zeta.array()).all());
  CHECK((fa.rho.array() == fb.rho.array()).all());
}

TEST_CASE("implicit mode derivative agrees with refits along the outer iterates") {
  Model m = fixture_model("es_si", 6, 250);
  const FitResult fr = fit(m);
  REQUIRE(fr.trace.size() >= 3);
  for (size_t k : {size_t{0}, fr.trace.size() / 2, fr.trace.size() - 1}) {
    const CheckResult r = check_dzeta_refit(m, fr.trace[k].rho, 1e-5);
    CHECK_MESSAGE(r.pass, "iterate " << k << " " << r.error);
  }
}
