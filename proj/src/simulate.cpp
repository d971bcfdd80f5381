#include <algorithm>
#include <cmath>
#include <random>

#include "nestgam/error.hpp"
#include "nestgam/oracle.hpp"

namespace nestgam {

double sim_outer(double u) { return 1.5 * std::tanh(u) + 0.3 * u; }

namespace {

Eigen::VectorXd standardized(const Eigen::VectorXd& s) {
  if (s.size() == 0) return s;
  const double mu = s.mean();
  const double sd = std::sqrt((s.array() - mu).square().mean());
  return sd > 0 ? Eigen::VectorXd((s.array() - mu) / sd) : Eigen::VectorXd(s.array() - mu);
}

Eigen::VectorXd ar1(std::mt19937_64& rng, int n, double phi, double sd) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd x(n);
  double v = 0.0;
  for (int i = 0; i < n; ++i) {
    v = phi * v + sd * N(rng);
    x(i) = v + std::sin(2 * M_PI * i / 96.0);
  }
  return x;
}

Eigen::VectorXd exp_smooth_series(const Eigen::VectorXd& x, double omega) {
  Eigen::VectorXd s(x.size());
  double prev = x.size() ? x(0) : 0.0;
  for (int i = 0; i < x.size(); ++i) {
    prev = omega * prev + (1 - omega) * x(i);
    s(i) = prev;
  }
  return s;
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

std::vector<std::string> scenario_kinds() { return {"single_index", "exp_smooth", "exp_smooth_two", "kernel_smooth", "netdemand"}; }

SimResult simulate(const SimScenario& sc) {
  require(sc.n >= 0, "scenario size must be non-negative");
  require(sc.noise >= 0, "noise scale must be non-negative");
  std::mt19937_64 rng(sc.seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int n = sc.n;
  SimResult R;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sd = Eigen::VectorXd::Constant(n, sc.noise);

  if (sc.kind == "single_index") {
    require(sc.dims >= 1, "single_index needs at least one dimension");
    Eigen::VectorXd a(sc.dims);
    for (int k = 0; k < sc.dims; ++k) a(k) = N(rng);
    a /= a.norm();
    Eigen::MatrixXd X(n, sc.dims);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < sc.dims; ++k) X(i, k) = N(rng);
    const Eigen::VectorXd idx = X * a;
    for (int i = 0; i < n; ++i) mu(i) = sim_outer(idx(i));
    for (int k = 0; k < sc.dims; ++k) R.data.add("x" + std::to_string(k + 1), X.col(k));
    R.truth["a"] = to_vec(a);
  } else if (sc.kind == "exp_smooth" || sc.kind == "exp_smooth_two") {
    require(sc.omega > 0 && sc.omega < 1, "omega must lie in (0, 1)");
    const Eigen::VectorXd x = ar1(rng, n, 0.7, 1.0);
    const Eigen::VectorXd s = standardized(exp_smooth_series(x, sc.omega));
    for (int i = 0; i < n; ++i) mu(i) = sim_outer(s(i));
    R.data.add("x", x);
    R.truth["omega"] = {sc.omega};
    if (sc.kind == "exp_smooth_two") {
      require(sc.omega2 > 0 && sc.omega2 < 1, "omega2 must lie in (0, 1)");
      const Eigen::VectorXd x2 = ar1(rng, n, 0.7, 1.0);
      const Eigen::VectorXd s2 = standardized(exp_smooth_series(x2, sc.omega2));
      for (int i = 0; i < n; ++i) mu(i) += std::sin(s2(i));
      R.data.add("x2", x2);
      R.truth["omega"].push_back(sc.omega2);
    }
  } else if (sc.kind == "kernel_smooth") {
    require(sc.bandwidth > 0, "bandwidth must be positive");
    const int k = 10;
    Eigen::MatrixXd P(n, 2);
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) {
      P(i, 0) = U(rng);
      P(i, 1) = U(rng);
    }
    for (int i = 0; i < n; ++i) z(i) = std::sin(3 * P(i, 0)) + N(rng);
    const double h[2] = {sc.bandwidth, 1.5 * sc.bandwidth};
    Eigen::VectorXd s(n);
    std::vector<std::pair<double, int>> d;
    for (int i = 0; i < n; ++i) {
      d.clear();
      for (int j = 0; j < n; ++j) {
        const double dd = (P.row(i) - P.row(j)).squaredNorm();
        if (dd > 0) d.emplace_back(dd, j);
      }
      const int kk = std::min<int>(k, static_cast<int>(d.size()));
      std::partial_sort(d.begin(), d.begin() + kk, d.end());
      double wsum = 0.0, acc = 0.0;
      for (int u = 0; u < kk; ++u) {
        const int j = d[u].second;
        const double dx = (P(i, 0) - P(j, 0)) / h[0], dy = (P(i, 1) - P(j, 1)) / h[1];
        const double w = std::exp(-0.5 * (dx * dx + dy * dy));
        wsum += w;
        acc += w * z(j);
      }
      s(i) = wsum > 0 ? acc / wsum : 0.0;
    }
    const Eigen::VectorXd st = standardized(s);
    for (int i = 0; i < n; ++i) mu(i) = sim_outer(st(i));
    R.data.add("lon", P.col(0));
    R.data.add("lat", P.col(1));
    R.data.add("z", z);
    R.truth["bandwidth"] = {h[0], h[1]};
  } else if (sc.kind == "netdemand") {
    const Eigen::VectorXd temp = ar1(rng, n, 0.8, 1.0);
    const Eigen::VectorXd s = standardized(exp_smooth_series(temp, sc.omega));
    const int q = 4;
    Eigen::VectorXd a(q);
    a << 0.8, -0.4, 0.3, 0.3;
    a /= a.norm();
    Eigen::MatrixXd X(n, q);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < q; ++k) X(i, k) = N(rng);
    const Eigen::VectorXd idx = X * a;
    Eigen::VectorXd doy(n), hour(n);
    for (int i = 0; i < n; ++i) {
      doy(i) = std::fmod(i * 365.0 / n * 2.0, 365.0);
      hour(i) = U(rng) * 24.0;
    }
    for (int i = 0; i < n; ++i) {
      mu(i) = 2.0 * sim_outer(s(i)) + 1.5 * std::tanh(1.5 * idx(i)) + std::sin(2 * M_PI * doy(i) / 365.0) +
              0.5 * std::cos(2 * M_PI * hour(i) / 24.0);
      sd(i) = sc.noise * std::exp(0.3 * std::sin(2 * M_PI * hour(i) / 24.0));
    }
    R.data.add("temp", temp);
    for (int k = 0; k < q; ++k) R.data.add("w" + std::to_string(k + 1), X.col(k));
    R.data.add("doy", doy);
    R.data.add("hour", hour);
    R.truth["omega"] = {sc.omega};
    R.truth["a"] = to_vec(a);
  } else {
    fail(ErrorCode::Config, "unknown scenario kind '" + sc.kind + "'");
  }
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = mu(i) + sd(i) * N(rng);
  if (sc.noise == 0) y = mu;
  R.data.add("mu", mu);
  R.data.add("y", y);
  R.data.set_rows(n);
  return R;
}

namespace {

TermSpec smooth_term(const std::string& col, int k) {
  TermSpec t;
  t.type = TermType::Smooth;
  t.smooth.column = col;
  t.smooth.k = k;
  return t;
}

TermSpec nested_term(const std::string& name, TransformSpec ts, int k) {
  TermSpec t;
  t.type = TermType::Nested;
  t.nested.name = name;
  t.nested.transform = std::move(ts);
  t.nested.k = k;
  return t;
}

}  // namespace

ModelSpec scenario_model(const SimScenario& sc) {
  ModelSpec ms;
  PredictorSpec loc{"mu", LinkKind::Identity, true, 0.0, {}};
  PredictorSpec scale{"logvar", LinkKind::Log, true, 0.0, {}};
  if (sc.kind == "single_index") {
    TransformSpec ts;
    ts.kind = TransformKind::LinearIndex;
    for (int k = 0; k < sc.dims; ++k) ts.columns.push_back("x" + std::to_string(k + 1));
    loc.terms.push_back(nested_term("si", ts, 12));
  } else if (sc.kind == "exp_smooth" || sc.kind == "exp_smooth_two") {
    TransformSpec ts;
    ts.kind = TransformKind::ExpSmooth;
    ts.column = "x";
    loc.terms.push_back(nested_term("es", ts, 12));
    if (sc.kind == "exp_smooth_two") {
      ts.column = "x2";
      ts.omega_init = 0.9;
      loc.terms.push_back(nested_term("es2", ts, 12));
    }
  } else if (sc.kind == "kernel_smooth") {
    TransformSpec ts;
    ts.kind = TransformKind::KernelSmooth;
    ts.coords = {"lon", "lat"};
    ts.value_column = "z";
    ts.n_neighbors = 10;
    loc.terms.push_back(nested_term("ks", ts, 12));
  } else if (sc.kind == "netdemand") {
    TransformSpec es;
    es.kind = TransformKind::ExpSmooth;
    es.column = "temp";
    loc.terms.push_back(nested_term("temp_es", es, 12));
    TransformSpec si;
    si.kind = TransformKind::LinearIndex;
    si.columns = {"w1", "w2", "w3", "w4"};
    loc.terms.push_back(nested_term("w_si", si, 12));
    loc.terms.push_back(smooth_term("doy", 10));
    loc.terms.push_back(smooth_term("hour", 10));
    scale.terms.push_back(smooth_term("hour", 8));
  } else {
    fail(ErrorCode::Config, "unknown scenario kind '" + sc.kind + "'");
  }
  ms.predictors = {loc, scale};
  return ms;
}

}  // namespace nestgam
