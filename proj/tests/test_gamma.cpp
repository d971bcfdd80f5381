#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "nestgam/assembly.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/optimize.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;
using namespace testing_support;

namespace {

const char* kFixtures[] = {"es_si", "ks_si", "es_design"};

}  // namespace

TEST_CASE("zero mode derivative leaves only the direct penalty term") {
  const Model m = fixture_model("es_si", 1, 80);
  const Eigen::VectorXd z = fixture_zeta(m, 1);
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), 0.4);
  const std::vector<Eigen::VectorXd> dz(m.n_penalties(), Eigen::VectorXd::Zero(m.p));
  const auto dH = hessian_rho_derivs(m, z, rho, dz);
  for (int g = 0; g < m.n_penalties(); ++g) CHECK(dH[g] == -std::exp(rho(g)) * m.S_embedded(g));
}

TEST_CASE("standard effects match the dense chain rule") {
  const Model m = fixture_model("additive", 2, 100);
  const Eigen::VectorXd z = fixture_zeta(m, 2);
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), 0.1);
  std::mt19937_64 rng(3);
  std::vector<Eigen::VectorXd> dz;
  for (int g = 0; g < m.n_penalties(); ++g) dz.push_back(normals(rng, m.p));
  const auto dH = hessian_rho_derivs(m, z, rho, dz);
  for (int g = 0; g < m.n_penalties(); ++g) {
    const Eigen::MatrixXd ref = dense_hessian_rho_reference(m, z, dz[g]) - std::exp(rho(g)) * m.S_embedded(g);
    CHECK(max_rel_err(dH[g], ref) < 1e-8);
  }
}

TEST_CASE("every block rule matches the dense reference and every exception is exercised") {
  std::map<std::string, long> coverage;
  for (const char* fx : kFixtures) {
    const Model m = fixture_model(fx, 5, 80);
    for (std::uint64_t s : {1u, 2u}) {
      for (const CheckResult& r : check_gamma_dense(m, fixture_zeta(m, s), 1e-8, &coverage, "", s, fx))
        CHECK_MESSAGE(r.pass, r.name << " " << r.error);
    }
  }
  for (GammaRule g : exceptional_rules()) CHECK_MESSAGE(coverage[to_string(g)] > 0, to_string(g));
  CHECK(exceptional_rules().size() == kNumGammaRules - 1);
}

TEST_CASE("corrupting one block is caught and named") {
  for (GammaRule g : exceptional_rules()) {
    const std::string name = to_string(g);
    std::set<std::string> failed;
    for (const char* fx : kFixtures) {
      const Model m = fixture_model(fx, 5, 80);
      for (const CheckResult& r : check_gamma_dense(m, fixture_zeta(m, 1), 1e-8, nullptr, name, 1, fx))
        if (!r.pass) failed.insert(r.entries.at(0));
    }
    CHECK_MESSAGE(failed.count("gamma." + name) == 1, name);
    CHECK_MESSAGE(failed.size() == 1, name);
  }
}

TEST_CASE("refit finite differences on nested models") {
  for (const std::string fx : {"es_si", "ks_si"}) {
    const Model m = fixture_model(fx, 1, 200);
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), 1.0);
    const CheckResult r = check_gamma_refit(m, rho, 1e-4);
    CHECK_MESSAGE(r.pass, fx << " " << r.error);
  }
}

TEST_CASE("missing third-order stacks are rejected") {
  const Model m = fixture_model("es_si", 1, 60);
  Evaluator ev(m);
  ev.set(fixture_zeta(m, 1), 2);
  CHECK_THROWS(loglik_hessian_dir(ev, Eigen::VectorXd::Ones(m.p)));
}
