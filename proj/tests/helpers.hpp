#pragma once

#include <random>
#include <string>
#include <vector>

#include "nestgam/model.hpp"

namespace testing_support {

using namespace nestgam;

/// Gaussian location model with known variance: the scale predictor is a constant offset.
struct GaussianCase {
  Model model;
  Eigen::MatrixXd X;  // columns in coefficient order
  Eigen::VectorXd y;
  double sigma2 = 1.0;
};

inline Eigen::VectorXd normals(std::mt19937_64& rng, int n, double sd = 1.0) {
  std::normal_distribution<double> N(0.0, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = N(rng);
  return v;
}

/// Ridge-penalized linear model with `groups` penalty blocks over p columns.
inline GaussianCase ridge_case(std::uint64_t seed, int n, int p, int groups, double sigma2) {
  std::mt19937_64 rng(seed);
  GaussianCase c;
  c.sigma2 = sigma2;
  c.X.resize(n, p);
  DataTable t;
  for (int k = 0; k < p; ++k) c.X.col(k) = normals(rng, n);
  c.y = c.X * normals(rng, p, 0.5) + std::sqrt(sigma2) * normals(rng, n);
  for (int k = 0; k < p; ++k) t.add("c" + std::to_string(k), c.X.col(k));
  t.add("y", c.y);
  t.set_rows(n);
  PredictorSpec loc{"mu", LinkKind::Identity, false, 0.0, {}};
  const int per = p / groups;
  for (int g = 0; g < groups; ++g) {
    TermSpec ts;
    ts.type = TermType::Parametric;
    ts.ridge = true;
    const int end = g + 1 == groups ? p : (g + 1) * per;
    for (int k = g * per; k < end; ++k) ts.columns.push_back("c" + std::to_string(k));
    loc.terms.push_back(ts);
  }
  ModelSpec ms;
  ms.predictors = {loc, PredictorSpec{"logvar", LinkKind::Log, false, std::log(sigma2), {}}};
  c.model = build(ms, t);
  return c;
}

/// Single uncentred smooth of u (no intercept) plus optional parametric columns.
inline GaussianCase smooth_case(std::uint64_t seed, int n, int k, double sigma2, int extra_cols = 0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  GaussianCase c;
  c.sigma2 = sigma2;
  Eigen::VectorXd u(n);
  for (auto& v : u) v = U(rng);
  DataTable t;
  t.add("u", u);
  PredictorSpec loc{"mu", LinkKind::Identity, false, 0.0, {}};
  if (extra_cols > 0) {
    TermSpec par;
    par.type = TermType::Parametric;
    for (int j = 0; j < extra_cols; ++j) {
      t.add("p" + std::to_string(j), normals(rng, n));
      par.columns.push_back("p" + std::to_string(j));
    }
    loc.terms.push_back(par);
  }
  TermSpec sm;
  sm.type = TermType::Smooth;
  sm.smooth.column = "u";
  sm.smooth.k = k;
  sm.smooth.center = false;
  loc.terms.push_back(sm);
  c.y = (2 * M_PI * u.array()).sin().matrix() + std::sqrt(sigma2) * normals(rng, n);
  t.add("y", c.y);
  t.set_rows(n);
  ModelSpec ms;
  ms.predictors = {loc, PredictorSpec{"logvar", LinkKind::Log, false, std::log(sigma2), {}}};
  c.model = build(ms, t);
  c.X.resize(n, c.model.p);
  for (size_t g = 0; g < c.model.gamma.size(); ++g) {
    const Segment& s = c.model.segments[c.model.gamma[g].segment];
    c.X.middleCols(s.start, s.len) = c.model.train.Z[g];
  }
  return c;
}

}  // namespace testing_support
