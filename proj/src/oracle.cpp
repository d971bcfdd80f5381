#include "nestgam/oracle.hpp"

#include <cmath>

#include "nestgam/assembly.hpp"
#include "nestgam/error.hpp"

namespace nestgam {

FdResult fd_jacobian(const VecFn& f, const Eigen::VectorXd& x, const FdConfig& cfg) {
  const Eigen::VectorXd f0 = f(x);
  FdResult r;
  r.jacobian.resize(f0.size(), x.size());
  r.steps.resize(x.size());
  auto central = [&](int j, double h) {
    Eigen::VectorXd xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    const Eigen::VectorXd fp = f(xp), fm = f(xm);
    require(fp.allFinite() && fm.allFinite(), "non-finite function value at a perturbed point", ErrorCode::Numeric);
    return Eigen::VectorXd((fp - fm) / (2.0 * h));
  };
  for (int j = 0; j < x.size(); ++j) {
    const double h = std::max(cfg.rel_step * std::abs(x(j)), cfg.abs_step);
    r.steps(j) = h;
    const Eigen::VectorXd d1 = central(j, h);
    r.jacobian.col(j) = cfg.richardson ? Eigen::VectorXd((4.0 * central(j, 0.5 * h) - d1) / 3.0) : d1;
  }
  return r;
}

Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x, const FdConfig& cfg) {
  const VecFn vf = [&](const Eigen::VectorXd& z) { return Eigen::VectorXd::Constant(1, f(z)); };
  return fd_jacobian(vf, x, cfg).jacobian.row(0).transpose();
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "shape mismatch in max_rel_err");
  double m = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) m = std::max(m, rel_err(a(i, j), b(i, j)));
  return m;
}

namespace {

/// Dense first/second/third derivatives of one linear predictor at one observation.
struct EtaDense {
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  std::vector<double> T;  // p^3
  int p;
  explicit EtaDense(int p_) : g(Eigen::VectorXd::Zero(p_)), H(Eigen::MatrixXd::Zero(p_, p_)), T(p_ * p_ * p_, 0.0), p(p_) {}
  double& t(int a, int b, int c) { return T[(a * p + b) * p + c]; }
  void set_sym3(int a, int b, int c, double v) {
    const int idx[3] = {a, b, c};
    static const int perm[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (const auto& q : perm) t(idx[q[0]], idx[q[1]], idx[q[2]]) = v;
  }
  Eigen::MatrixXd contract(const Eigen::VectorXd& v) const {
    Eigen::MatrixXd R = Eigen::MatrixXd::Zero(p, p);
    for (int a = 0; a < p; ++a)
      for (int b = 0; b < p; ++b) {
        double s = 0.0;
        for (int c = 0; c < p; ++c) s += T[(a * p + b) * p + c] * v(c);
        R(a, b) = s;
      }
    return R;
  }
};

struct NestedDense {
  TransformState ts;
  Eigen::MatrixXd B[4];
  Eigen::VectorXd e, f, g;
};

std::vector<NestedDense> nested_dense(const Model& model, const Eigen::VectorXd& zeta, int order) {
  std::vector<NestedDense> out;
  for (size_t u = 0; u < model.nested.size(); ++u) {
    const NestedEffect& ne = model.nested[u];
    const Segment& si = model.segments[ne.inner_seg];
    const Segment& so = model.segments[ne.outer_seg];
    NestedDense d;
    d.ts = model.eval_transform(static_cast<int>(u), zeta.segment(si.start, si.len), order);
    for (int r = 0; r <= 3; ++r) d.B[r] = ne.outer.eval(d.ts.s_tilde, r);
    const Eigen::VectorXd b = zeta.segment(so.start, so.len);
    d.e = d.B[1] * b;
    d.f = d.B[2] * b;
    d.g = d.B[3] * b;
    out.push_back(std::move(d));
  }
  return out;
}

EtaDense eta_dense(const Model& model, const std::vector<NestedDense>& nd, int i, int j, bool third) {
  EtaDense E(model.p);
  for (size_t t = 0; t < model.gamma.size(); ++t) {
    const Segment& s = model.segments[model.gamma[t].segment];
    if (s.predictor != j) continue;
    E.g.segment(s.start, s.len) = model.train.Z[t].row(i).transpose();
  }
  for (size_t u = 0; u < model.nested.size(); ++u) {
    const NestedEffect& ne = model.nested[u];
    if (ne.predictor != j) continue;
    const Segment& so = model.segments[ne.outer_seg];
    const Segment& si = model.segments[ne.inner_seg];
    const NestedDense& d = nd[u];
    const TransformState& ts = d.ts;
    for (int l = 0; l < so.len; ++l) E.g(so.start + l) = d.B[0](i, l);
    for (int k = 0; k < si.len; ++k) E.g(si.start + k) = d.e(i) * ts.grad(i, k);
    for (int l = 0; l < so.len; ++l)
      for (int k = 0; k < si.len; ++k) {
        const double v = d.B[1](i, l) * ts.grad(i, k);
        E.H(so.start + l, si.start + k) = v;
        E.H(si.start + k, so.start + l) = v;
      }
    auto s2 = [&](int k, int m) { return ts.linear() ? 0.0 : ts.hess(i, k, m); };
    auto s3 = [&](int k, int m, int r) { return ts.linear() ? 0.0 : ts.third(i, k, m, r); };
    for (int k = 0; k < si.len; ++k)
      for (int m = 0; m < si.len; ++m)
        E.H(si.start + k, si.start + m) = d.f(i) * ts.grad(i, k) * ts.grad(i, m) + d.e(i) * s2(k, m);
    if (!third) continue;
    for (int l = 0; l < so.len; ++l)
      for (int k = 0; k < si.len; ++k)
        for (int m = k; m < si.len; ++m)
          E.set_sym3(so.start + l, si.start + k, si.start + m,
                     d.B[2](i, l) * ts.grad(i, k) * ts.grad(i, m) + d.B[1](i, l) * s2(k, m));
    for (int k = 0; k < si.len; ++k)
      for (int m = k; m < si.len; ++m)
        for (int r = m; r < si.len; ++r) {
          const double sk = ts.grad(i, k), sm = ts.grad(i, m), sr = ts.grad(i, r);
          const double v = d.g(i) * sk * sm * sr + d.f(i) * (s2(k, m) * sr + s2(k, r) * sm + s2(m, r) * sk) +
                           d.e(i) * s3(k, m, r);
          E.set_sym3(si.start + k, si.start + m, si.start + r, v);
        }
  }
  return E;
}

}  // namespace

Eigen::MatrixXd dense_loglik_hessian(const Model& model, const Eigen::VectorXd& zeta) {
  require(model.p <= kDenseLimit, "dense reference is limited to p <= " + std::to_string(kDenseLimit));
  Evaluator ev(model);
  ev.set(zeta, 2);
  const PredictorDerivs& pd = ev.pred();
  const auto nd = nested_dense(model, zeta, 2);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(model.p, model.p);
  for (int i = 0; i < model.n(); ++i) {
    std::vector<EtaDense> E;
    for (int j = 0; j < model.m; ++j) E.push_back(eta_dense(model, nd, i, j, false));
    for (int j = 0; j < model.m; ++j) {
      H += pd.d1[j](i) * E[j].H;
      for (int k = 0; k < model.m; ++k) H += pd.d2[j][k](i) * E[j].g * E[k].g.transpose();
    }
  }
  return H;
}

Eigen::MatrixXd dense_hessian_rho_reference(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& v) {
  require(model.p <= kDenseLimit, "dense reference is limited to p <= " + std::to_string(kDenseLimit));
  require(v.size() == model.p, "direction has the wrong length");
  Evaluator ev(model);
  ev.set(zeta, 3);
  const PredictorDerivs& pd = ev.pred();
  const auto nd = nested_dense(model, zeta, 3);
  const int m = model.m;
  Eigen::MatrixXd R = Eigen::MatrixXd::Zero(model.p, model.p);
  for (int i = 0; i < model.n(); ++i) {
    std::vector<EtaDense> E;
    std::vector<Eigen::VectorXd> Hv;
    std::vector<double> gv;
    for (int j = 0; j < m; ++j) {
      E.push_back(eta_dense(model, nd, i, j, true));
      Hv.push_back(E[j].H * v);
      gv.push_back(E[j].g.dot(v));
    }
    for (int j = 0; j < m; ++j) {
      R += pd.d1[j](i) * E[j].contract(v);
      for (int k = 0; k < m; ++k) {
        const double l2 = pd.d2[j][k](i);
        R += l2 * (Hv[j] * E[k].g.transpose() + E[j].g * Hv[k].transpose() + E[j].H * gv[k]);
        for (int l = 0; l < m; ++l) R += pd.d3[j][k][l](i) * gv[l] * E[j].g * E[k].g.transpose();
      }
    }
  }
  // scaling penalties: q = (V - c)^2 with V = mean of s~^2 (s~ has zero mean)
  for (size_t u = 0; u < model.nested.size(); ++u) {
    const Segment& si = model.segments[model.nested[u].inner_seg];
    const TransformState& ts = nd[u].ts;
    const int pa = si.len, n = model.n();
    const Eigen::VectorXd va = v.segment(si.start, si.len);
    auto s2 = [&](int r, int k, int mm) { return ts.linear() ? 0.0 : ts.hess(r, k, mm); };
    auto s3 = [&](int r, int k, int mm, int q) { return ts.linear() ? 0.0 : ts.third(r, k, mm, q); };
    double V = 0.0;
    Eigen::VectorXd V1 = Eigen::VectorXd::Zero(pa);
    Eigen::MatrixXd V2 = Eigen::MatrixXd::Zero(pa, pa);
    std::vector<double> V3(pa * pa * pa, 0.0);
    for (int r = 0; r < n; ++r) {
      const double s = ts.s_tilde(r);
      V += s * s;
      for (int j = 0; j < pa; ++j) {
        V1(j) += 2 * s * ts.grad(r, j);
        for (int k = 0; k < pa; ++k) {
          V2(j, k) += 2 * (ts.grad(r, j) * ts.grad(r, k) + s * s2(r, j, k));
          for (int l = 0; l < pa; ++l)
            V3[(j * pa + k) * pa + l] += 2 * (s2(r, j, k) * ts.grad(r, l) + s2(r, j, l) * ts.grad(r, k) +
                                              ts.grad(r, j) * s2(r, k, l) + s * s3(r, j, k, l));
        }
      }
    }
    V /= n;
    V1 /= n;
    V2 /= n;
    for (double& x : V3) x /= n;
    const double dv = V - model.spec.c;
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(pa, pa);
    for (int j = 0; j < pa; ++j)
      for (int k = 0; k < pa; ++k)
        for (int l = 0; l < pa; ++l) {
          const double q3 = 2 * (V2(j, k) * V1(l) + V2(j, l) * V1(k) + V1(j) * V2(k, l)) + 2 * dv * V3[(j * pa + k) * pa + l];
          Q(j, k) += q3 * va(l);
        }
    R.block(si.start, si.start, pa, pa) -= Q;
  }
  return R;
}

double gaussian_evidence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2, const Eigen::MatrixXd& P) {
  require(sigma2 > 0, "sigma2 must be positive");
  Eigen::LLT<Eigen::MatrixXd> lp(P);
  require(lp.info() == Eigen::Success, "prior precision must be positive definite");
  const int n = static_cast<int>(X.rows());
  const Eigen::MatrixXd C =
      sigma2 * Eigen::MatrixXd::Identity(n, n) + X * lp.solve(X.transpose());
  Eigen::LLT<Eigen::MatrixXd> lc(C);
  require(lc.info() == Eigen::Success, "marginal covariance is not positive definite", ErrorCode::Numeric);
  const double logdet = 2.0 * lc.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (n * std::log(2.0 * M_PI) + logdet + y.dot(lc.solve(y)));
}

double stein_edf_gaussian(const Eigen::MatrixXd& X, double sigma2, const Eigen::MatrixXd& S) {
  // mu_i = x_i' z, so d mu_i / d z = x_i
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(X.cols(), X.cols());
  for (int i = 0; i < X.rows(); ++i) G += X.row(i).transpose() * X.row(i);
  const Eigen::MatrixXd A = G / sigma2 + S;
  return A.ldlt().solve(G).trace() / sigma2;
}

}  // namespace nestgam
