#include <doctest.h>

#include <chrono>
#include <cmath>

#include "helpers.hpp"
#include "nestgam/assembly.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/error.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;
using namespace testing_support;

TEST_CASE("layout bookkeeping") {
  const GaussianCase c = smooth_case(1, 60, 10, 1.0, 2);
  CHECK(c.model.p == 12);
  REQUIRE(c.model.n_penalties() == 1);
  CHECK(c.model.penalties[0].null_dim == 2);
  // segments disjoint and covering
  int next = 0;
  for (const auto& s : c.model.segments) {
    CHECK(s.start == next);
    next += s.len;
  }
  CHECK(next == c.model.p);
}

TEST_CASE("single-index segment sizes") {
  const DataTable d = fixture_data(1, 50);
  ModelSpec ms;
  TermSpec t;
  t.type = TermType::Nested;
  t.nested.name = "si";
  t.nested.k = 10;
  t.nested.transform.kind = TransformKind::LinearIndex;
  t.nested.transform.columns = {"w1", "w2", "w3", "w4", "u"};
  ms.predictors = {PredictorSpec{"mu", LinkKind::Identity, false, 0.0, {t}},
                   PredictorSpec{"logvar", LinkKind::Log, true, 0.0, {}}};
  const Model m = build(ms, d);
  REQUIRE(m.nested.size() == 1);
  CHECK(m.segments[m.nested[0].inner_seg].len == 5);
  CHECK(m.segments[m.nested[0].outer_seg].len == 3);
}

TEST_CASE("build is deterministic") {
  const Model a = fixture_model("reference", 3, 120);
  const Model b = fixture_model("reference", 3, 120);
  REQUIRE(a.p == b.p);
  CHECK(a.initial_zeta() == b.initial_zeta());
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(a.n_penalties(), 0.3);
  CHECK(a.S_lambda(rho) == b.S_lambda(rho));
  const Eigen::VectorXd z = fixture_zeta(a, 2);
  CHECK(hessian(a, z, rho) == hessian(b, z, rho));
}

TEST_CASE("missing columns are reported by name") {
  ModelSpec ms = fixture_spec("es_si");
  ms.predictors[0].terms[0].nested.transform.column = "nope";
  try {
    build(ms, fixture_data(1, 40));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("nope") != std::string::npos);
    CHECK(e.code() == ErrorCode::Data);
  }
}

TEST_CASE("value, gradient and Hessian against the Gaussian closed form") {
  const GaussianCase c = smooth_case(4, 80, 10, 0.5, 2);
  const Model& m = c.model;
  const Eigen::VectorXd rho = Eigen::VectorXd::Constant(1, 0.7);
  const Eigen::MatrixXd S = m.S_lambda(rho);
  std::mt19937_64 rng(5);
  const Eigen::VectorXd z = normals(rng, m.p, 0.3);
  const Eigen::VectorXd r = c.y - c.X * z;
  const int n = m.n();
  const double closed = -0.5 * r.squaredNorm() / c.sigma2 - 0.5 * n * std::log(2 * M_PI * c.sigma2) - 0.5 * z.dot(S * z);
  const PosteriorEval pe = log_posterior(m, z, rho, 2);
  CHECK(std::abs(pe.value - closed) < 1e-10 * std::max(1.0, std::abs(closed)));
  CHECK(max_rel_err(pe.gradient, c.X.transpose() * r / c.sigma2 - S * z) < 1e-10);
  CHECK(max_rel_err(pe.hessian, -c.X.transpose() * c.X / c.sigma2 - S) < 1e-10);
  // all penalties off: value is the log-likelihood
  const Eigen::VectorXd off = Eigen::VectorXd::Constant(1, -700.0);
  CHECK(log_posterior(m, z, off).value == doctest::Approx(log_posterior(m, z, off).loglik).epsilon(1e-15));
  // coefficients in the penalty null space: a linear sequence on the smooth
  Eigen::VectorXd zn = Eigen::VectorXd::Zero(m.p);
  for (int i = 2; i < m.p; ++i) zn(i) = 0.1 * i - 0.3;
  CHECK(std::abs(log_posterior(m, zn, rho).penalty_value) < 1e-12);
}

TEST_CASE("gradient vanishes at the exact mode of a quadratic problem") {
  const GaussianCase c = ridge_case(2, 100, 6, 2, 0.8);
  const Eigen::VectorXd rho = Eigen::Vector2d(0.2, -0.5);
  const Eigen::MatrixXd A = c.X.transpose() * c.X / c.sigma2 + c.model.S_lambda(rho);
  const Eigen::VectorXd zhat = A.ldlt().solve(c.X.transpose() * c.y / c.sigma2);
  CHECK(gradient(c.model, zhat, rho).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("gradient and Hessian against finite differences") {
  for (const std::string fx : {"es_si", "ks_si", "es_design", "reference"}) {
    const Model m = fixture_model(fx, 7, 120);
    for (std::uint64_t s = 1; s <= 20; ++s) {
      const Eigen::VectorXd z = fixture_zeta(m, s);
      const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), -1.0 + 0.2 * s);
      const CheckResult g = check_gradient_fd(m, z, rho, 1e-6);
      const CheckResult h = check_hessian_fd(m, z, rho, 1e-5);
      CHECK_MESSAGE(g.pass, fx << " seed " << s << " " << g.error);
      CHECK_MESSAGE(h.pass, fx << " seed " << s << " " << h.error);
    }
  }
}

TEST_CASE("Hessian is symmetric before symmetrization") {
  const Model m = fixture_model("reference", 1, 150);
  Evaluator ev(m);
  ev.set(fixture_zeta(m, 4), 2);
  const Eigen::MatrixXd H = loglik_hessian(ev);
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("block Hessian equals the dense reference on every fixture") {
  for (const std::string fx : {"es_si", "ks_si", "es_design"}) {
    const Model m = fixture_model(fx, 2, 90);
    const CheckResult r = check_hessian_dense(m, fixture_zeta(m, 3), 1e-10);
    CHECK_MESSAGE(r.pass, fx << " " << r.error);
  }
}

TEST_CASE("pure linear-predictor Hessian is the weighted cross product") {
  const Model m = fixture_model("additive", 1, 100);
  const Eigen::VectorXd z = fixture_zeta(m, 1);
  Evaluator ev(m);
  ev.set(z, 2);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(m.n(), m.p);
  for (size_t g = 0; g < m.gamma.size(); ++g) {
    const Segment& s = m.segments[m.gamma[g].segment];
    Z.middleCols(s.start, s.len) = m.train.Z[g];
  }
  const Eigen::MatrixXd ref = Z.transpose() * ev.pred().d2[0][0].matrix().asDiagonal() * Z;
  CHECK(max_rel_err(loglik_hessian(ev), ref) < 1e-12);
}

TEST_CASE("transform caches are reused when only outer coefficients move") {
  const Model m = fixture_model("es_si", 1, 80);
  Evaluator ev(m);
  Eigen::VectorXd z = fixture_zeta(m, 1);
  ev.set(z, 2);
  const int before = ev.cache_hits();
  const Segment& so = m.segments[m.nested[0].outer_seg];
  z(so.start) += 0.1;
  ev.set(z, 2);
  CHECK(ev.cache_hits() > before);
}

TEST_CASE("Hessian cost is linear in n") {
  auto time_it = [](int n) {
    const Model m = fixture_model("es_si", 1, n);
    const Eigen::VectorXd z = fixture_zeta(m, 1);
    const Eigen::VectorXd rho = Eigen::VectorXd::Zero(m.n_penalties());
    double best = 1e9;
    for (int r = 0; r < 5; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      const Eigen::MatrixXd H = hessian(m, z, rho);
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      CHECK(H.allFinite());
    }
    return best;
  };
  const double t1 = time_it(2000), t2 = time_it(4000);
  CHECK(t2 / t1 < 2.5);
}
