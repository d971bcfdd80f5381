#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "helpers.hpp"
#include "nestgam/assembly.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/error.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;
using namespace testing_support;

TEST_CASE("central differences on elementary functions") {
  const ScalarFn sq = [](const Eigen::VectorXd& x) { return x(0) * x(0); };
  CHECK(std::abs(fd_gradient(sq, Eigen::VectorXd::Constant(1, 3.0))(0) - 6.0) < 1e-8);
  const ScalarFn sn = [](const Eigen::VectorXd& x) { return std::sin(x(0)); };
  CHECK(std::abs(fd_gradient(sn, Eigen::VectorXd::Zero(1))(0) - 1.0) < 1e-10);
}

TEST_CASE("central differences are second order") {
  // truncation error of a cubic is exactly h^2 times its leading coefficient
  const ScalarFn cubic = [](const Eigen::VectorXd& x) { return 0.7 * x(0) * x(0) * x(0) - x(0); };
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, 1.3);
  const double exact = 3 * 0.7 * 1.3 * 1.3 - 1.0;
  FdConfig c;
  c.rel_step = 1e-2;
  const double e1 = std::abs(fd_gradient(cubic, x, c)(0) - exact);
  c.rel_step = 5e-3;
  const double e2 = std::abs(fd_gradient(cubic, x, c)(0) - exact);
  const double ratio = e1 / e2;
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
  // Richardson removes the h^2 term
  c.richardson = true;
  CHECK(std::abs(fd_gradient(cubic, x, c)(0) - exact) < 1e-9);
}

TEST_CASE("step sizes are reported and non-finite values rejected") {
  const VecFn id = [](const Eigen::VectorXd& x) { return x; };
  const Eigen::VectorXd x = Eigen::Vector2d(0.0, 100.0);
  const FdResult r = fd_jacobian(id, x);
  CHECK(r.steps(0) == 1e-6);
  CHECK(r.steps(1) == doctest::Approx(1e-3));
  CHECK(max_rel_err(r.jacobian, Eigen::Matrix2d::Identity()) < 1e-9);
  const ScalarFn bad = [](const Eigen::VectorXd& x) { return x(0) > 0 ? std::log(-1.0) : 0.0; };
  CHECK_THROWS_AS(fd_gradient(bad, Eigen::VectorXd::Zero(1)), Error);
}

TEST_CASE("relative error metric") {
  CHECK(rel_err(1e-12, 0.0) == doctest::Approx(1e-12));
  CHECK(rel_err(1000.0, 1001.0) == doctest::Approx(1.0 / 1001.0));
  CHECK(rel_err(-2.0, -2.0) == 0.0);
}

TEST_CASE("Gaussian evidence") {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(1, 1);
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(1);
  const double ev = gaussian_evidence(X, y, 1.0, Eigen::MatrixXd::Ones(1, 1));
  CHECK(ev == doctest::Approx(-0.5 * std::log(2 * M_PI) - 0.5 * std::log(2.0)).epsilon(1e-14));
  CHECK(std::abs(ev + 1.265512) < 1e-6);

  // prior collapsing to zero leaves the likelihood of a zero-mean model
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd Xr = Eigen::MatrixXd::NullaryExpr(30, 3, [&] { return normals(rng, 1)(0); });
  const Eigen::VectorXd yr = normals(rng, 30, 0.8);
  const double s2 = 0.64;
  const double limit = -0.5 * 30 * std::log(2 * M_PI * s2) - 0.5 * yr.squaredNorm() / s2;
  CHECK(rel_err(gaussian_evidence(Xr, yr, s2, 1e14 * Eigen::MatrixXd::Identity(3, 3)), limit) < 1e-9);

  Eigen::Matrix2d singular;
  singular << 1, 1, 1, 1;
  CHECK_THROWS_AS(gaussian_evidence(Eigen::MatrixXd::Ones(2, 2), Eigen::VectorXd::Zero(2), 1.0, singular), Error);
}

TEST_CASE("dense rho-derivative reference") {
  const Model m = fixture_model("additive", 1, 80);
  REQUIRE(m.p <= kDenseLimit);
  const Eigen::VectorXd z = fixture_zeta(m, 1);
  CHECK(dense_hessian_rho_reference(m, z, Eigen::VectorXd::Zero(m.p)).cwiseAbs().maxCoeff() == 0.0);

  // pure linear-predictor model: contraction equals the directional derivative of the Hessian
  std::mt19937_64 rng(9);
  const Eigen::VectorXd v = normals(rng, m.p);
  const Eigen::VectorXd rho = Eigen::VectorXd::Zero(m.n_penalties());
  const VecFn h = [&](const Eigen::VectorXd& t) {
    const Eigen::MatrixXd H = hessian(m, z + t(0) * v, rho);
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(H.data(), H.size()));
  };
  const Eigen::VectorXd col = fd_jacobian(h, Eigen::VectorXd::Zero(1)).jacobian.col(0);
  const Eigen::MatrixXd fd = Eigen::Map<const Eigen::MatrixXd>(col.data(), m.p, m.p);
  CHECK(max_rel_err(dense_hessian_rho_reference(m, z, v), fd) < 1e-7);

  const Model big = fixture_model("all_kinds", 1, 80);
  REQUIRE(big.p > kDenseLimit);
  CHECK_THROWS_AS(dense_hessian_rho_reference(big, big.initial_zeta(), Eigen::VectorXd::Zero(big.p)), Error);
  CHECK_THROWS_AS(dense_loglik_hessian(big, big.initial_zeta()), Error);
}

TEST_CASE("simulation is reproducible") {
  for (const std::string& kind : scenario_kinds()) {
    SimScenario sc;
    sc.kind = kind;
    sc.n = 200;
    sc.seed = 17;
    const SimResult a = simulate(sc);
    const SimResult b = simulate(sc);
    REQUIRE(a.data.names() == b.data.names());
    for (int j = 0; j < a.data.cols(); ++j) CHECK_MESSAGE((a.data.col(j).array() == b.data.col(j).array()).all(), kind);
    CHECK(a.truth == b.truth);
    CHECK(a.data.rows() == 200);
    sc.seed = 18;
    CHECK_FALSE((simulate(sc).data.col("y").array() == a.data.col("y").array()).all());
  }
}

TEST_CASE("noise-free simulation returns the deterministic predictor") {
  for (const std::string& kind : scenario_kinds()) {
    SimScenario sc;
    sc.kind = kind;
    sc.n = 150;
    sc.noise = 0.0;
    const SimResult r = simulate(sc);
    CHECK_MESSAGE((r.data.col("y").array() == r.data.col("mu").array()).all(), kind);
  }
}

TEST_CASE("empty scenarios give empty tables") {
  for (const std::string& kind : scenario_kinds()) {
    SimScenario sc;
    sc.kind = kind;
    sc.n = 0;
    const SimResult r = simulate(sc);
    CHECK_MESSAGE(r.data.rows() == 0, kind);
    CHECK(r.data.has("y"));
  }
}

TEST_CASE("scenario models build on their data") {
  for (const std::string& kind : scenario_kinds()) {
    SimScenario sc;
    sc.kind = kind;
    sc.n = 120;
    CHECK_NOTHROW(build(scenario_model(sc), simulate(sc).data));
  }
}

TEST_CASE("derivative manifest is fully covered by the check suite") {
  const CheckReport r = run_checks(CheckOptions{});
  for (const auto& c : r.results) CHECK_MESSAGE(c.pass, c.name << " " << c.error << " " << c.detail);
  CHECK(r.uncovered.empty());
  CHECK(r.all_pass);
  std::set<std::string> seen;
  for (const auto& c : r.results) seen.insert(c.entries.begin(), c.entries.end());
  for (const std::string& e : derivative_manifest()) CHECK_MESSAGE(seen.count(e) == 1, e);
  const std::string csv = format_check_report(r);
  CHECK(csv.rfind("check,status,error,tolerance,detail", 0) == 0);
}

TEST_CASE("a corrupted block fails the check suite") {
  CheckOptions o;
  o.corrupt_rule = to_string(exceptional_rules().front());
  const CheckReport r = run_checks(o);
  CHECK_FALSE(r.all_pass);
}
