#include "nestgam/checks.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <random>
#include <sstream>

#include "nestgam/assembly.hpp"
#include "nestgam/error.hpp"
#include "nestgam/inference.hpp"
#include "nestgam/optimize.hpp"
#include "nestgam/oracle.hpp"

namespace nestgam {

std::vector<std::string> derivative_manifest() {
  std::vector<std::string> m = {
      "basis.deriv1", "basis.deriv2", "basis.deriv3", "basis.deriv4", "basis.outer_constraints",
      "transform.exp_smooth.grad", "transform.exp_smooth.hess", "transform.exp_smooth.third",
      "transform.kernel_smooth.grad", "transform.kernel_smooth.hess", "transform.kernel_smooth.third",
      "transform.linear_index.grad", "transform.scaling.grad", "transform.scaling.hess",
      "transform.scaling.hess_rho", "transform.scaling.single_index", "family.gaussian.d1",
      "family.gaussian.d2", "family.gaussian.d3", "family.chain_eta", "family.chain_stilde",
      "assembly.gradient", "assembly.hessian", "optimize.dzeta_drho", "optimize.laml_value",
      "optimize.laml_gradient", "optimize.hessian_rho", "inference.edf", "inference.crps"};
  for (GammaRule r : exceptional_rules()) m.push_back("gamma." + to_string(r));
  m.push_back("gamma.general");
  return m;
}

namespace {

CheckResult result(std::string name, std::vector<std::string> entries, double err, double tol, std::string detail = "") {
  CheckResult r;
  r.name = std::move(name);
  r.entries = std::move(entries);
  r.error = err;
  r.tol = tol;
  r.pass = std::isfinite(err) && err <= tol;
  r.detail = std::move(detail);
  return r;
}

Eigen::VectorXd randn(std::mt19937_64& rng, int n, double sd = 1.0) {
  std::normal_distribution<double> N(0.0, sd);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = N(rng);
  return v;
}

Eigen::VectorXd flatten(const Eigen::MatrixXd& m) { return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size()); }

Eigen::VectorXd ar_series(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd x(n);
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    v = 0.7 * v + N(rng);
    x(i) = v;
  }
  return x;
}

Eigen::VectorXd unit_scale(const Eigen::VectorXd& s) {
  const double mu = s.mean();
  const double sd = std::sqrt((s.array() - mu).square().mean());
  return (s.array() - mu) / (sd > 0 ? sd : 1.0);
}

TermSpec nested(const std::string& name, TransformSpec t, int k = 10) {
  TermSpec ts;
  ts.type = TermType::Nested;
  ts.nested.name = name;
  ts.nested.transform = std::move(t);
  ts.nested.k = k;
  return ts;
}

TransformSpec es_spec(const std::string& col, std::vector<std::string> design = {}) {
  TransformSpec t;
  t.kind = TransformKind::ExpSmooth;
  t.column = col;
  t.design = std::move(design);
  return t;
}

TransformSpec ks_spec(int k) {
  TransformSpec t;
  t.kind = TransformKind::KernelSmooth;
  t.coords = {"lon", "lat"};
  t.value_column = "z";
  t.n_neighbors = k;
  return t;
}

TransformSpec si_spec(std::vector<std::string> cols) {
  TransformSpec t;
  t.kind = TransformKind::LinearIndex;
  t.columns = std::move(cols);
  return t;
}

TermSpec smooth(const std::string& col, int k) {
  TermSpec t;
  t.type = TermType::Smooth;
  t.smooth.column = col;
  t.smooth.k = k;
  return t;
}

}  // namespace

DataTable fixture_data(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> N(0.0, 1.0);
  const Eigen::VectorXd x = ar_series(rng, n);
  const Eigen::VectorXd x2 = ar_series(rng, n);
  Eigen::VectorXd d1(n), lon(n), lat(n), z(n), u(n), y(n);
  Eigen::MatrixXd W(n, 4);
  for (int i = 0; i < n; ++i) {
    d1(i) = 2 * U(rng) - 1;
    lon(i) = U(rng);
    lat(i) = U(rng);
    u(i) = U(rng);
    for (int k = 0; k < 4; ++k) W(i, k) = N(rng);
  }
  for (int i = 0; i < n; ++i) z(i) = std::sin(3 * lon(i)) + 0.5 * N(rng);
  // signal components
  Eigen::VectorXd es(n);
  double prev = x(0);
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / (1.0 + std::exp(-(0.8 + 0.5 * d1(i))));
    prev = w * prev + (1 - w) * x(i);
    es(i) = prev;
  }
  Eigen::VectorXd ks(n);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0, ws = 0.0;
    for (int j = 0; j < n; ++j) {
      const double dx = (lon(i) - lon(j)) / 0.08, dy = (lat(i) - lat(j)) / 0.08;
      const double w = i == j ? 0.0 : std::exp(-0.5 * (dx * dx + dy * dy));
      acc += w * z(j);
      ws += w;
    }
    ks(i) = ws > 0 ? acc / ws : 0.0;
  }
  const Eigen::VectorXd esu = unit_scale(es), ksu = unit_scale(ks);
  for (int i = 0; i < n; ++i) {
    const double mu = std::tanh(esu(i)) + 0.8 * std::tanh(ksu(i)) + std::sin(0.8 * (W(i, 0) + 0.6 * W(i, 1))) +
                      std::sin(2 * M_PI * u(i));
    const double sd = 0.4 * std::exp(0.3 * std::tanh(W(i, 2) - 0.5 * W(i, 3)));
    y(i) = mu + sd * N(rng);
  }
  DataTable t;
  t.add("x", x);
  t.add("x2", x2);
  t.add("d1", d1);
  t.add("lon", lon);
  t.add("lat", lat);
  t.add("z", z);
  t.add("u", u);
  for (int k = 0; k < 4; ++k) t.add("w" + std::to_string(k + 1), W.col(k));
  t.add("y", y);
  t.set_rows(n);
  return t;
}

ModelSpec fixture_spec(const std::string& name) {
  ModelSpec ms;
  PredictorSpec loc{"mu", LinkKind::Identity, true, 0.0, {}};
  PredictorSpec scale{"logvar", LinkKind::Log, true, 0.0, {}};
  if (name == "es_si") {
    loc.terms = {nested("es", es_spec("x"))};
    scale.terms = {nested("si", si_spec({"w1", "w2"}))};
  } else if (name == "ks_si") {
    loc.terms = {nested("ks", ks_spec(5)), nested("si", si_spec({"w1", "w2", "w3"}))};
  } else if (name == "es_design") {
    loc.terms = {smooth("u", 6)};
    scale.terms = {nested("es", es_spec("x", {"d1"}))};
  } else if (name == "reference" || name == "all_kinds") {
    loc.terms = {nested("es", es_spec("x")), nested("ks", ks_spec(8)), nested("si1", si_spec({"w1", "w2"})),
                 smooth("u", name == "reference" ? 10 : 16)};
    scale.terms = {nested("si2", si_spec({"w3", "w4"}))};
  } else if (name == "additive") {
    loc.terms = {smooth("u", 8), smooth("d1", 6)};
    scale.intercept = false;
    scale.offset = std::log(0.25);
  } else {
    fail(ErrorCode::Config, "unknown fixture '" + name + "'");
  }
  ms.predictors = {loc, scale};
  return ms;
}

Model fixture_model(const std::string& name, std::uint64_t seed, int n) {
  return build(fixture_spec(name), fixture_data(seed, n));
}

Eigen::VectorXd fixture_zeta(const Model& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed * 7919 + 17);
  Eigen::VectorXd z = model.initial_zeta();
  for (const auto& s : model.segments) {
    switch (s.kind) {
      case SegKind::Gamma: z.segment(s.start, s.len) += randn(rng, s.len, 0.3); break;
      case SegKind::Outer: z.segment(s.start, s.len) = randn(rng, s.len, 0.7); break;
      case SegKind::Inner: z.segment(s.start, s.len) += randn(rng, s.len, 0.05); break;
    }
  }
  return z;
}

Eigen::VectorXd fit_mode(const Model& model, const Eigen::VectorXd& rho, double tol) {
  Eigen::VectorXd z = model.initial_zeta();
  NewtonOptions staged;
  staged.tol = tol;
  if (!model.nested.empty()) {
    staged.frozen.assign(model.p, false);
    for (const auto& e : model.nested) {
      const Segment& si = model.segments[e.inner_seg];
      for (int i = 0; i < si.len; ++i) staged.frozen[si.start + i] = true;
    }
    z = newton_map(model, rho, z, staged).zeta;
  }
  NewtonOptions full;
  full.tol = tol;
  const NewtonReport r = newton_map(model, rho, z, full);
  require(r.converged, "fixture mode did not converge: " + r.message, ErrorCode::NotConverged);
  return r.zeta;
}

CheckResult check_basis_fd(double tol) {
  const SplineBasis b(-3.0, 3.0, 12, 6);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-2.95, 2.95);
  Eigen::VectorXd x(100);
  for (int i = 0; i < 100; ++i) x(i) = U(rng);
  double err = 0.0;
  const double h = 1e-5;
  for (int t = 1; t <= 4; ++t) {
    const Eigen::MatrixXd fd = (b.eval(x.array() + h, t - 1) - b.eval(x.array() - h, t - 1)) / (2 * h);
    err = std::max(err, max_rel_err(b.eval(x, t), fd));
  }
  return result("basis.bspline_fd", {"basis.deriv1", "basis.deriv2", "basis.deriv3", "basis.deriv4"}, err, tol);
}

CheckResult check_outer_constraints(double tol) {
  const KnotRange kr = extreme_knots(0.05, 1.0);
  const ConstrainedOuterBasis ob(SplineBasis(kr.lo, kr.hi, 12, 6));
  double err = ob.eval(Eigen::VectorXd::Zero(1), 0).cwiseAbs().maxCoeff();
  Eigen::VectorXd bnd(2);
  bnd << kr.lo, kr.hi;
  for (int d = 2; d <= 4; ++d) err = std::max(err, ob.eval(bnd, d).cwiseAbs().maxCoeff());
  // linear continuation beyond both boundaries
  Eigen::VectorXd beyond(2);
  beyond << kr.lo - 0.5, kr.hi + 0.5;
  err = std::max(err, ob.eval(beyond, 2).cwiseAbs().maxCoeff());
  return result("basis.outer_constraints", {"basis.outer_constraints"}, err, tol);
}

namespace {

struct TransformFixture {
  TransformKind kind;
  Eigen::VectorXd x;
  ExpSmoothConfig es;
  KernelSmoothConfig ks;
  Eigen::MatrixXd X;
  Eigen::VectorXd a;
  TransformState eval(const Eigen::VectorXd& a_, int order) const {
    switch (kind) {
      case TransformKind::ExpSmooth: return exp_smooth_eval(x, es, a_, order);
      case TransformKind::KernelSmooth: return kernel_smooth_eval(ks, a_, order);
      case TransformKind::LinearIndex: return linear_index_eval(X, a_, order);
    }
    fail(ErrorCode::Internal, "unhandled transform kind");
  }
};

TransformFixture transform_fixture(TransformKind kind, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  TransformFixture f;
  f.kind = kind;
  const int n = 40;
  if (kind == TransformKind::ExpSmooth) {
    f.x = ar_series(rng, n);
    f.es.design.resize(n, 2);
    f.es.design.col(0).setOnes();
    for (int i = 0; i < n; ++i) f.es.design(i, 1) = 2 * U(rng) - 1;
    f.es.z0 = f.x(0);
    f.a = Eigen::Vector3d(0.2, 0.5, -0.7);
  } else if (kind == TransformKind::KernelSmooth) {
    f.ks.points.resize(n, 2);
    f.ks.ref_values.resize(n);
    for (int i = 0; i < n; ++i) {
      f.ks.points(i, 0) = U(rng);
      f.ks.points(i, 1) = U(rng);
      f.ks.ref_values(i) = std::sin(4 * f.ks.points(i, 0)) + 0.3 * (2 * U(rng) - 1);
    }
    f.ks.ref_points = f.ks.points;
    f.ks.neighbor_sets.resize(n);
    for (int i = 0; i < n; ++i)
      for (int r = 1; r <= 5; ++r) f.ks.neighbor_sets[i].push_back((i + r * 7) % n);
    f.a = Eigen::Vector3d(-0.1, 1.5, 2.2);
  } else {
    f.X.resize(n, 3);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) f.X(i, k) = 2 * U(rng) - 1;
    f.X.rowwise() -= f.X.colwise().mean();
    f.a = Eigen::Vector3d(0.7, -0.3, 0.5);
  }
  return f;
}

}  // namespace

CheckResult check_transform_fd(TransformKind kind, double tol, std::uint64_t seed) {
  const TransformFixture f = transform_fixture(kind, seed);
  const TransformState st = f.eval(f.a, 3);
  const int n = st.n(), p = st.p();
  const std::string k = to_string(kind);
  FdConfig cfg;
  const VecFn val = [&](const Eigen::VectorXd& a) { return f.eval(a, 0).s_tilde; };
  double err = max_rel_err(st.grad, fd_jacobian(val, f.a, cfg).jacobian);
  if (kind == TransformKind::LinearIndex) {
    err = std::max(err, (st.grad - f.X).cwiseAbs().maxCoeff());
    return result("transform." + k + "_fd", {"transform.linear_index.grad"}, err, tol);
  }
  const VecFn grad = [&](const Eigen::VectorXd& a) { return flatten(f.eval(a, 1).grad); };
  const Eigen::MatrixXd J2 = fd_jacobian(grad, f.a, cfg).jacobian;  // (n*p) x p, column-major over (i, j)
  const VecFn hess = [&](const Eigen::VectorXd& a) {
    const TransformState s = f.eval(a, 2);
    Eigen::VectorXd out(n * p * p);
    for (int j = 0; j < p; ++j)
      for (int l = 0; l < p; ++l)
        for (int i = 0; i < n; ++i) out((j * p + l) * n + i) = s.hess(i, j, l);
    return out;
  };
  const Eigen::MatrixXd J3 = fd_jacobian(hess, f.a, cfg).jacobian;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < p; ++j)
      for (int l = 0; l < p; ++l) {
        err = std::max(err, rel_err(st.hess(i, j, l), J2(j * n + i, l)));
        for (int m = 0; m < p; ++m) err = std::max(err, rel_err(st.third(i, j, l, m), J3((j * p + l) * n + i, m)));
      }
  return result("transform." + k + "_fd",
                {"transform." + k + ".grad", "transform." + k + ".hess", "transform." + k + ".third"}, err, tol);
}

CheckResult check_scaling_fd(double tol, std::uint64_t seed) {
  double err = 0.0;
  for (TransformKind kind : {TransformKind::ExpSmooth, TransformKind::KernelSmooth}) {
    const TransformFixture f = transform_fixture(kind, seed);
    const double c = 1.0;
    std::mt19937_64 rng(seed + 3);
    const Eigen::VectorXd v = randn(rng, static_cast<int>(f.a.size()));
    const ScalingPenalty q = scaling_penalty_eval(f.eval(f.a, 3), c, &v);
    const ScalarFn val = [&](const Eigen::VectorXd& a) { return scaling_penalty_eval(f.eval(a, 1), c).value; };
    const VecFn grad = [&](const Eigen::VectorXd& a) { return scaling_penalty_eval(f.eval(a, 2), c).grad; };
    err = std::max(err, max_rel_err(q.grad, fd_gradient(val, f.a)));
    err = std::max(err, max_rel_err(q.hess, fd_jacobian(grad, f.a).jacobian));
    const VecFn hess_along = [&](const Eigen::VectorXd& t) {
      return flatten(scaling_penalty_eval(f.eval(f.a + t(0) * v, 2), c).hess);
    };
    const Eigen::VectorXd fdh = fd_jacobian(hess_along, Eigen::VectorXd::Zero(1)).jacobian.col(0);
    err = std::max(err, max_rel_err(flatten(*q.hess_rho), fdh));
  }
  return result("transform.scaling_fd", {"transform.scaling.grad", "transform.scaling.hess", "transform.scaling.hess_rho"},
                err, tol);
}

CheckResult check_scaling_dual_path(double tol, std::uint64_t seed) {
  const TransformFixture f = transform_fixture(TransformKind::LinearIndex, seed);
  const Eigen::MatrixXd sig = f.X.transpose() * f.X / static_cast<double>(f.X.rows());
  const TransformState st = linear_index_eval(f.X, f.a, 3, &sig);
  std::mt19937_64 rng(seed + 5);
  const Eigen::VectorXd v = randn(rng, static_cast<int>(f.a.size()));
  const ScalingPenalty a = scaling_penalty_eval(st, 1.0, &v);
  const ScalingPenalty b = scaling_penalty_general(st, 1.0, &v);
  double err = rel_err(a.value, b.value);
  err = std::max(err, max_rel_err(a.grad, b.grad));
  err = std::max(err, max_rel_err(a.hess, b.hess));
  err = std::max(err, max_rel_err(*a.hess_rho, *b.hess_rho));
  return result("transform.scaling_single_index_dual", {"transform.scaling.single_index"}, err, tol);
}

CheckResult check_family_fd(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 30;
  const Eigen::ArrayXd y = randn(rng, n).array();
  const Eigen::VectorXd mu = randn(rng, n, 0.5), lv = randn(rng, n, 0.4);
  const FamilyDerivs F = gaussian_ls_derivs(y, mu.array(), lv.array());
  double err = 0.0;
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    Eigen::ArrayXd mp = mu.array(), mm = mu.array(), lp = lv.array(), lm = lv.array();
    if (j == 0) mp += h, mm -= h;
    else lp += h, lm -= h;
    const FamilyDerivs P = gaussian_ls_derivs(y, mp, lp), M = gaussian_ls_derivs(y, mm, lm);
    err = std::max(err, max_rel_err(F.d1[j].matrix(), ((P.ll - M.ll) / (2 * h)).matrix()));
    for (int k = 0; k < 2; ++k) {
      err = std::max(err, max_rel_err(F.d2[k][j].matrix(), ((P.d1[k] - M.d1[k]) / (2 * h)).matrix()));
      for (int l = 0; l < 2; ++l)
        err = std::max(err, max_rel_err(F.d3[k][l][j].matrix(), ((P.d2[k][l] - M.d2[k][l]) / (2 * h)).matrix()));
    }
  }
  return result("family.gaussian_fd", {"family.gaussian.d1", "family.gaussian.d2", "family.gaussian.d3"}, err, tol);
}

CheckResult check_chain_eta_fd(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 30;
  const Eigen::ArrayXd y = randn(rng, n).array();
  const Eigen::ArrayXd e1 = randn(rng, n, 0.5).array(), e2 = randn(rng, n, 0.4).array();
  GaussianLocationScale fam;
  auto at = [&](const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) {
    std::vector<LinkDerivs> L = {link_eval(LinkKind::Identity, a), link_eval(LinkKind::Log, b)};
    return chain_to_eta(fam.derivs(y, {L[0].theta, L[1].theta}, 3), L);
  };
  const PredictorDerivs D = at(e1, e2);
  double err = 0.0;
  const double h = 1e-5;
  for (int j = 0; j < 2; ++j) {
    const PredictorDerivs P = j == 0 ? at(e1 + h, e2) : at(e1, e2 + h);
    const PredictorDerivs M = j == 0 ? at(e1 - h, e2) : at(e1, e2 - h);
    err = std::max(err, max_rel_err(D.d1[j].matrix(), ((P.ll - M.ll) / (2 * h)).matrix()));
    for (int k = 0; k < 2; ++k) {
      err = std::max(err, max_rel_err(D.d2[k][j].matrix(), ((P.d1[k] - M.d1[k]) / (2 * h)).matrix()));
      for (int l = 0; l < 2; ++l)
        err = std::max(err, max_rel_err(D.d3[k][l][j].matrix(), ((P.d2[k][l] - M.d2[k][l]) / (2 * h)).matrix()));
    }
  }
  return result("family.chain_eta_fd", {"family.chain_eta"}, err, tol);
}

CheckResult check_chain_stilde_fd(double tol, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = 20;
  const Eigen::ArrayXd y = randn(rng, n).array();
  const Eigen::ArrayXd e0 = randn(rng, n, 0.5).array(), lv = randn(rng, n, 0.3).array();
  const Eigen::ArrayXd c1 = randn(rng, n).array(), c2 = randn(rng, n).array(), c3 = randn(rng, n).array();
  GaussianLocationScale fam;
  // eta_1(s) = e0 + c1 s + c2 s^2 / 2 + c3 s^3 / 6, evaluated at s = t
  auto at = [&](double t) {
    const Eigen::ArrayXd eta = e0 + c1 * t + c2 * t * t / 2 + c3 * t * t * t / 6;
    std::vector<LinkDerivs> L = {link_eval(LinkKind::Identity, eta), link_eval(LinkKind::Log, lv)};
    const PredictorDerivs P = chain_to_eta(fam.derivs(y, {L[0].theta, L[1].theta}, 3), L);
    const StildeDerivs S = chain_to_stilde(P, 0, c1 + c2 * t + c3 * t * t / 2, c2 + c3 * t, c3);
    return std::make_pair(P, S);
  };
  const double h = 1e-5;
  const auto [P0, S0] = at(0.0);
  const auto [Pp, Sp] = at(h);
  const auto [Pm, Sm] = at(-h);
  auto fd = [&](const Eigen::ArrayXd& a, const Eigen::ArrayXd& b) { return Eigen::VectorXd((a - b) / (2 * h)); };
  double err = max_rel_err(S0.s.matrix(), fd(Pp.ll, Pm.ll));
  err = std::max(err, max_rel_err(S0.ss.matrix(), fd(Sp.s, Sm.s)));
  err = std::max(err, max_rel_err(S0.sss.matrix(), fd(Sp.ss, Sm.ss)));
  err = std::max(err, max_rel_err(S0.es.matrix(), fd(Pp.d1[0], Pm.d1[0])));
  err = std::max(err, max_rel_err(S0.ees.matrix(), fd(Pp.d2[0][0], Pm.d2[0][0])));
  err = std::max(err, max_rel_err(S0.ess.matrix(), fd(Sp.es, Sm.es)));
  return result("family.chain_stilde_fd", {"family.chain_stilde"}, err, tol);
}

CheckResult check_gradient_fd(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, double tol) {
  const ScalarFn f = [&](const Eigen::VectorXd& z) { return log_posterior(model, z, rho, 0).value; };
  const double err = max_rel_err(gradient(model, zeta, rho), fd_gradient(f, zeta));
  return result("assembly.gradient_fd", {"assembly.gradient"}, err, tol);
}

CheckResult check_hessian_fd(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, double tol) {
  const VecFn g = [&](const Eigen::VectorXd& z) { return gradient(model, z, rho); };
  const Eigen::MatrixXd H = hessian(model, zeta, rho);
  const double asym = (H - H.transpose()).cwiseAbs().maxCoeff();
  const double err = std::max(max_rel_err(H, fd_jacobian(g, zeta).jacobian), asym);
  return result("assembly.hessian_fd", {"assembly.hessian"}, err, tol);
}

CheckResult check_hessian_dense(const Model& model, const Eigen::VectorXd& zeta, double tol) {
  Evaluator ev(model);
  ev.set(zeta, 2);
  const double err = max_rel_err(loglik_hessian(ev), dense_loglik_hessian(model, zeta));
  return result("assembly.hessian_dense", {"assembly.hessian"}, err, tol);
}

std::vector<CheckResult> check_gamma_dense(const Model& model, const Eigen::VectorXd& zeta, double tol,
                                           std::map<std::string, long>* coverage, const std::string& corrupt_rule,
                                           std::uint64_t seed, const std::string& fixture) {
  std::mt19937_64 rng(seed);
  Evaluator ev(model);
  ev.set(zeta, 3);
  GammaOptions opt;
  opt.coverage = coverage;
  opt.corrupt_rule = corrupt_rule;
  const int S = static_cast<int>(model.segments.size());
  std::map<std::string, double> worst;
  for (int d = 0; d < S; ++d) {
    const Segment& sd = model.segments[d];
    Eigen::VectorXd v = Eigen::VectorXd::Zero(model.p);
    v.segment(sd.start, sd.len) = randn(rng, sd.len);
    Eigen::MatrixXd P = loglik_hessian_dir(ev, v, opt);
    for (size_t u = 0; u < model.nested.size(); ++u) {
      const Segment& si = model.segments[model.nested[u].inner_seg];
      const Eigen::VectorXd va = v.segment(si.start, si.len);
      if (va.isZero(0.0)) continue;
      P.block(si.start, si.start, si.len, si.len) -=
          *scaling_penalty_eval(ev.effect(static_cast<int>(u)).ts, model.spec.c, &va).hess_rho;
    }
    const Eigen::MatrixXd R = dense_hessian_rho_reference(model, zeta, v);
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < S; ++c) {
        const Segment& a = model.segments[r];
        const Segment& b = model.segments[c];
        // orientation used by the routing table for same-effect outer/inner pairs
        if (a.effect >= 0 && a.effect == b.effect && a.kind == SegKind::Inner && b.kind == SegKind::Outer) continue;
        const std::string rule = to_string(route_gamma(model, r, c, d));
        const double e = max_rel_err(P.block(a.start, b.start, a.len, b.len), R.block(a.start, b.start, a.len, b.len));
        worst[rule] = std::max(worst[rule], e);
      }
  }
  std::vector<CheckResult> out;
  for (const auto& [rule, e] : worst) {
    const std::string detail = e > tol ? "block " + rule + " disagrees with the dense reference" : "";
    out.push_back(result("gamma.dense[" + fixture + "]." + rule, {"gamma." + rule}, e, tol, detail));
  }
  return out;
}

CheckResult check_gamma_refit(const Model& model, const Eigen::VectorXd& rho, double tol, const std::string& corrupt_rule) {
  const Eigen::VectorXd zhat = fit_mode(model, rho, 1e-12);
  const NegHessianFactor f = factor_neg_hessian(-hessian(model, zhat, rho));
  const std::vector<Eigen::VectorXd> dz = dzeta_drho_all(f, model, zhat, rho);
  GammaOptions opt;
  opt.corrupt_rule = corrupt_rule;
  const std::vector<Eigen::MatrixXd> dH = hessian_rho_derivs(model, zhat, rho, dz, opt);
  const double h = 1e-4;
  NewtonOptions nopt;
  nopt.tol = 1e-12;
  double err = 0.0;
  for (int g = 0; g < model.n_penalties(); ++g) {
    Eigen::VectorXd rp = rho, rm = rho;
    rp(g) += h;
    rm(g) -= h;
    const Eigen::VectorXd zp = newton_map(model, rp, zhat, nopt).zeta;
    const Eigen::VectorXd zm = newton_map(model, rm, zhat, nopt).zeta;
    const Eigen::MatrixXd fd = (hessian(model, zp, rp) - hessian(model, zm, rm)) / (2 * h);
    err = std::max(err, max_rel_err(dH[g], fd));
  }
  return result("optimize.hessian_rho_refit", {"optimize.hessian_rho"}, err, tol);
}

CheckResult check_dzeta_refit(const Model& model, const Eigen::VectorXd& rho, double tol) {
  const Eigen::VectorXd zhat = fit_mode(model, rho, 1e-12);
  const double h = 1e-4;
  NewtonOptions nopt;
  nopt.tol = 1e-12;
  double err = 0.0;
  for (int g = 0; g < model.n_penalties(); ++g) {
    Eigen::VectorXd rp = rho, rm = rho;
    rp(g) += h;
    rm(g) -= h;
    const Eigen::VectorXd fd =
        (newton_map(model, rp, zhat, nopt).zeta - newton_map(model, rm, zhat, nopt).zeta) / (2 * h);
    err = std::max(err, max_rel_err(dzeta_drho(model, zhat, rho, g), fd));
  }
  return result("optimize.dzeta_refit", {"optimize.dzeta_drho"}, err, tol);
}

CheckResult check_laml_gradient_fd(const Model& model, const Eigen::VectorXd& rho, double tol) {
  const Eigen::VectorXd zhat = fit_mode(model, rho, 1e-12);
  const LamlEval L = laml_at(model, rho, zhat, true);
  NewtonOptions nopt;
  nopt.tol = 1e-12;
  const ScalarFn f = [&](const Eigen::VectorXd& r) { return laml(model, r, zhat, false, nullptr, nopt).value; };
  FdConfig cfg;
  cfg.rel_step = 0.0;
  cfg.abs_step = 1e-4;
  const double err = max_rel_err(L.gradient, fd_gradient(f, rho, cfg));
  return result("optimize.laml_gradient_fd", {"optimize.laml_gradient"}, err, tol);
}

namespace {

struct RidgeDraw {
  Model model;
  Eigen::MatrixXd X;
  Eigen::VectorXd y, rho;
  double sigma2;
};

RidgeDraw ridge_draw(std::mt19937_64& rng, int n) {
  std::uniform_int_distribution<int> P(3, 20), G(1, 3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int p = P(rng);
  const int groups = std::min(G(rng), p);
  RidgeDraw d;
  d.sigma2 = 0.2 + 2.0 * U(rng);
  d.X = Eigen::MatrixXd(n, p);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < p; ++k) d.X(i, k) = randn(rng, 1)(0);
  const Eigen::VectorXd beta = randn(rng, p, 0.5);
  d.y = d.X * beta + std::sqrt(d.sigma2) * randn(rng, n);
  DataTable t;
  for (int k = 0; k < p; ++k) t.add("c" + std::to_string(k + 1), d.X.col(k));
  t.add("y", d.y);
  t.set_rows(n);
  ModelSpec ms;
  PredictorSpec loc{"mu", LinkKind::Identity, false, 0.0, {}};
  PredictorSpec scale{"logvar", LinkKind::Log, false, std::log(d.sigma2), {}};
  for (int g = 0; g < groups; ++g) {
    TermSpec ts;
    ts.type = TermType::Parametric;
    ts.ridge = true;
    for (int k = g; k < p; k += groups) ts.columns.push_back("c" + std::to_string(k + 1));
    loc.terms.push_back(ts);
  }
  ms.predictors = {loc, scale};
  d.model = build(ms, t);
  // the design columns are grouped by term, so reorder X to the coefficient layout
  Eigen::MatrixXd Xl(n, p);
  int col = 0;
  for (int g = 0; g < groups; ++g)
    for (int k = g; k < p; k += groups) Xl.col(col++) = d.X.col(k);
  d.X = Xl;
  d.rho = Eigen::VectorXd(groups);
  for (int g = 0; g < groups; ++g) d.rho(g) = -2.0 + 5.0 * U(rng);
  return d;
}

}  // namespace

CheckResult check_laml_exact(double tol, std::uint64_t seed, int draws, int n) {
  std::mt19937_64 rng(seed);
  double err = 0.0;
  for (int k = 0; k < draws; ++k) {
    RidgeDraw d = ridge_draw(rng, n);
    const LamlEval L = laml(d.model, d.rho, Eigen::VectorXd::Zero(d.model.p), false);
    const double ev = gaussian_evidence(d.X, d.y, d.sigma2, d.model.S_lambda(d.rho));
    err = std::max(err, std::abs(L.value - ev) / std::max({1.0, std::abs(L.value), std::abs(ev)}));
  }
  return result("optimize.laml_exact", {"optimize.laml_value"}, err, tol);
}

CheckResult check_stein_edf(double tol, std::uint64_t seed) {
  const Model m = fixture_model("additive", seed, 200);
  double err = 0.0;
  for (double r : {-2.0, 1.0, 4.0}) {
    const Eigen::VectorXd rho = Eigen::VectorXd::Constant(m.n_penalties(), r);
    const Eigen::VectorXd z = fit_mode(m, rho);
    const FitState st = posterior(m, z, rho);
    Eigen::MatrixXd X(m.n(), m.p);
    for (size_t t = 0; t < m.gamma.size(); ++t) {
      const Segment& s = m.segments[m.gamma[t].segment];
      X.middleCols(s.start, s.len) = m.train.Z[t];
    }
    const double sigma2 = std::exp(m.spec.predictors[1].offset);
    err = std::max(err, rel_err(st.F.trace(), stein_edf_gaussian(X, sigma2, m.S_lambda(rho))));
  }
  return result("inference.stein_edf", {"inference.edf"}, err, tol);
}

CheckResult check_crps_quadrature(double tol) {
  using boost::math::quadrature::gauss_kronrod;
  double err = 0.0;
  const double ys[] = {0.0, 1.3, -2.1}, mus[] = {0.0, 0.4, -1.0}, sds[] = {1.0, 0.7, 2.5};
  for (int k = 0; k < 3; ++k) {
    const boost::math::normal N(mus[k], sds[k]);
    const double y = ys[k];
    auto below = [&](double x) { const double F = boost::math::cdf(N, x); return F * F; };
    auto above = [&](double x) { const double F = boost::math::cdf(N, x); return (1 - F) * (1 - F); };
    const double inf = std::numeric_limits<double>::infinity();
    const double q = gauss_kronrod<double, 61>::integrate(below, -inf, y, 15, 1e-12) +
                     gauss_kronrod<double, 61>::integrate(above, y, inf, 15, 1e-12);
    Eigen::ArrayXd yy(1), mm(1), ss(1);
    yy << y;
    mm << mus[k];
    ss << sds[k];
    err = std::max(err, std::abs(gaussian_crps(yy, mm, ss)(0) - q));
  }
  return result("inference.crps_quadrature", {"inference.crps"}, err, tol);
}

CheckResult check_knot_bound(std::uint64_t seed, int samples) {
  std::mt19937_64 rng(seed);
  const int n = 1000;
  const double pi = 0.05;
  const KnotRange kr = extreme_knots(pi, 1.0);
  const int bound = max_outside_count(pi, n);
  int worst = 0;
  std::exponential_distribution<double> E(1.0);
  for (int s = 0; s < samples; ++s) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = std::pow(E(rng), 3.0);  // heavy right tail
    v = unit_scale(v);
    int out = 0;
    for (int i = 0; i < n; ++i) out += (v(i) < kr.lo || v(i) > kr.hi);
    worst = std::max(worst, out);
  }
  CheckResult r = result("basis.knot_bound", {}, static_cast<double>(worst), static_cast<double>(bound));
  return r;
}

CheckReport run_checks(const CheckOptions& o) {
  const bool tight = o.profile == "tight";
  require(tight || o.profile == "default", "unknown tolerance profile '" + o.profile + "'", ErrorCode::Config);
  auto T = [&](double t) { return tight ? 1e-14 : t; };
  CheckReport rep;
  auto add = [&](CheckResult r) { rep.results.push_back(std::move(r)); };
  const std::uint64_t s = o.seed;

  add(check_basis_fd(T(1e-5)));
  add(check_outer_constraints(T(1e-10)));
  add(check_knot_bound(s, 50));
  for (TransformKind k : {TransformKind::ExpSmooth, TransformKind::KernelSmooth, TransformKind::LinearIndex})
    add(check_transform_fd(k, T(1e-5), s));
  add(check_scaling_fd(T(1e-5), s));
  add(check_scaling_dual_path(T(1e-10), s));
  add(check_family_fd(T(1e-6), s));
  add(check_chain_eta_fd(T(1e-6), s));
  add(check_chain_stilde_fd(T(1e-6), s));

  const Model ref = fixture_model("reference", s, 150);
  const Eigen::VectorXd zr = fixture_zeta(ref, s);
  const Eigen::VectorXd rr = Eigen::VectorXd::Constant(ref.n_penalties(), 0.5);
  add(check_gradient_fd(ref, zr, rr, T(1e-6)));
  add(check_hessian_fd(ref, zr, rr, T(1e-5)));

  for (const std::string fx : {"es_si", "ks_si", "es_design"}) {
    const Model m = fixture_model(fx, s, 80);
    const Eigen::VectorXd z = fixture_zeta(m, s);
    add(check_hessian_dense(m, z, T(1e-10)));
    for (auto& r : check_gamma_dense(m, z, T(1e-8), &rep.coverage, o.corrupt_rule, s, fx)) add(std::move(r));
  }

  const Model es = fixture_model("es_si", s, 200);
  const Eigen::VectorXd re = Eigen::VectorXd::Constant(es.n_penalties(), 1.0);
  add(check_dzeta_refit(es, re, T(1e-5)));
  add(check_laml_gradient_fd(es, re, T(1e-5)));
  add(check_gamma_refit(es, re, T(1e-4), o.corrupt_rule));
  add(check_laml_exact(T(1e-8), s, 5, 200));
  add(check_stein_edf(T(1e-8), s));
  add(check_crps_quadrature(T(1e-6)));

  // manifest: every derivative entry needs a check, every exceptional block must be hit
  std::map<std::string, bool> covered;
  for (const auto& r : rep.results)
    for (const auto& e : r.entries) covered[e] = true;
  for (const auto& e : derivative_manifest())
    if (!covered.count(e)) rep.uncovered.push_back(e);
  for (GammaRule g : exceptional_rules())
    if (!rep.coverage.count(to_string(g)) || rep.coverage.at(to_string(g)) == 0)
      rep.uncovered.push_back("gamma." + to_string(g) + " (never routed)");
  for (const auto& u : rep.uncovered) add(result("manifest." + u, {}, 1.0, 0.0, "no oracle check covers this entry"));
  for (const auto& r : rep.results) rep.all_pass = rep.all_pass && r.pass;
  return rep;
}

std::string format_check_report(const CheckReport& r) {
  std::ostringstream os;
  os << "check,status,error,tolerance,detail\n";
  for (const auto& c : r.results)
    os << c.name << "," << (c.pass ? "PASS" : "FAIL") << "," << format_double(c.error) << "," << format_double(c.tol)
       << "," << c.detail << "\n";
  return os.str();
}

}  // namespace nestgam
