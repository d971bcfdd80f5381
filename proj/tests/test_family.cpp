#include <doctest.h>

#include <cmath>
#include <random>

#include "nestgam/checks.hpp"
#include "nestgam/family.hpp"

using namespace nestgam;

namespace {

Eigen::ArrayXd one(double v) { return Eigen::ArrayXd::Constant(1, v); }

}  // namespace

TEST_CASE("gaussian at the mode") {
  const FamilyDerivs f = gaussian_ls_derivs(one(0.0), one(0.0), one(0.0));
  CHECK(f.ll(0) == doctest::Approx(-0.918939).epsilon(1e-6));
  CHECK(f.d1[0](0) == 0.0);
  const FamilyDerivs g = gaussian_ls_derivs(one(1.3), one(1.3), one(0.4));
  CHECK(g.d1[0](0) == 0.0);
}

TEST_CASE("gaussian log-likelihood sum matches the closed form") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> N;
  const int n = 200;
  Eigen::ArrayXd y(n);
  for (auto& v : y) v = N(rng);
  const FamilyDerivs f = gaussian_ls_derivs(y, Eigen::ArrayXd::Zero(n), Eigen::ArrayXd::Zero(n));
  const double closed = -0.5 * n * std::log(2 * M_PI) - 0.5 * y.square().sum();
  CHECK(std::abs(f.ll.sum() - closed) < 1e-10);
}

TEST_CASE("mixed partial symmetry") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> N;
  Eigen::ArrayXd y(20), mu(20), lv(20);
  for (int i = 0; i < 20; ++i) y(i) = N(rng), mu(i) = N(rng), lv(i) = 0.3 * N(rng);
  const FamilyDerivs f = gaussian_ls_derivs(y, mu, lv);
  CHECK((f.d2[0][1] - f.d2[1][0]).abs().maxCoeff() < 1e-12);
  CHECK((f.d3[0][0][1] - f.d3[0][1][0]).abs().maxCoeff() < 1e-12);
  CHECK((f.d3[0][1][1] - f.d3[1][0][1]).abs().maxCoeff() < 1e-12);
}

TEST_CASE("identity link leaves derivatives unchanged") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> N;
  Eigen::ArrayXd y(10), mu(10), v(10);
  for (int i = 0; i < 10; ++i) y(i) = N(rng), mu(i) = N(rng), v(i) = std::exp(0.2 * N(rng));
  GaussianLocationScale fam;
  const FamilyDerivs th = fam.derivs(y, {mu, v}, 3);
  const PredictorDerivs eta =
      chain_to_eta(th, {link_eval(LinkKind::Identity, mu), link_eval(LinkKind::Identity, v)});
  CHECK((eta.d1[0] == th.d1[0]).all());
  CHECK((eta.d2[0][0] == th.d2[0][0]).all());
  CHECK((eta.d3[0][0][0] == th.d3[0][0][0]).all());
  CHECK((eta.d3[1][0][1] == th.d3[1][0][1]).all());
}

TEST_CASE("log link first and third derivatives") {
  GaussianLocationScale fam;
  const Eigen::ArrayXd y = one(0.7), mu = one(0.1);
  auto ll = [&](double e) {
    return chain_to_eta(fam.derivs(y, {mu, one(std::exp(e))}, 3),
                        {link_eval(LinkKind::Identity, mu), link_eval(LinkKind::Log, one(e))});
  };
  const double e0 = -0.4;
  const PredictorDerivs d = ll(e0);
  const FamilyDerivs th = fam.derivs(y, {mu, one(std::exp(e0))}, 1);
  CHECK(d.d1[1](0) == doctest::Approx(th.d1[1](0) * std::exp(e0)).epsilon(1e-14));
  const double h = 1e-5;
  CHECK(std::abs(d.d1[1](0) - (ll(e0 + h).ll(0) - ll(e0 - h).ll(0)) / (2 * h)) < 1e-7);
  const double h3 = 1e-2;
  const double fd3 =
      (ll(e0 + 2 * h3).ll(0) - 2 * ll(e0 + h3).ll(0) + 2 * ll(e0 - h3).ll(0) - ll(e0 - 2 * h3).ll(0)) /
      (2 * h3 * h3 * h3);
  CHECK(std::abs(d.d3[1][1][1](0) - fd3) < 1e-4);
}

TEST_CASE("chain to the transformed covariate") {
  GaussianLocationScale fam;
  const Eigen::ArrayXd y = Eigen::ArrayXd::LinSpaced(5, -1, 1), mu = Eigen::ArrayXd::Zero(5);
  const Eigen::ArrayXd v = Eigen::ArrayXd::Ones(5);
  const PredictorDerivs p =
      chain_to_eta(fam.derivs(y, {mu, v}, 3), {link_eval(LinkKind::Identity, mu), link_eval(LinkKind::Log, v.log())});
  const Eigen::ArrayXd z = Eigen::ArrayXd::Zero(5), o = Eigen::ArrayXd::Ones(5);
  const StildeDerivs zero = chain_to_stilde(p, 0, z, z, z);
  CHECK(zero.s.abs().maxCoeff() == 0.0);
  CHECK(zero.ss.abs().maxCoeff() == 0.0);
  CHECK(zero.sss.abs().maxCoeff() == 0.0);
  CHECK(zero.es.abs().maxCoeff() == 0.0);
  const StildeDerivs lin = chain_to_stilde(p, 0, o, z, z);
  CHECK((lin.s == p.d1[0]).all());
}

TEST_CASE("chained derivatives pass the finite-difference oracle") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const CheckResult a = check_family_fd(1e-6, seed);
    const CheckResult b = check_chain_eta_fd(1e-5, seed);
    const CheckResult c = check_chain_stilde_fd(1e-5, seed);
    CHECK_MESSAGE(a.pass, seed << " " << a.error);
    CHECK_MESSAGE(b.pass, seed << " " << b.error);
    CHECK_MESSAGE(c.pass, seed << " " << c.error);
  }
}

TEST_CASE("gaussian CRPS") {
  const Eigen::ArrayXd c = gaussian_crps(one(0.0), one(0.0), one(1.0));
  CHECK(c(0) == doctest::Approx(2 * 0.3989422804014327 - 1 / std::sqrt(M_PI)));
  const CheckResult r = check_crps_quadrature(1e-6);
  CHECK_MESSAGE(r.pass, r.error);
}
