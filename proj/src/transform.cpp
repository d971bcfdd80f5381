#include "nestgam/transform.hpp"

#include <algorithm>
#include <cmath>

#include "nestgam/error.hpp"

namespace nestgam {

std::string to_string(TransformKind k) {
  switch (k) {
    case TransformKind::ExpSmooth: return "exp_smooth";
    case TransformKind::KernelSmooth: return "kernel_smooth";
    case TransformKind::LinearIndex: return "linear_index";
  }
  return "unknown";
}

TransformKind transform_kind_from_string(const std::string& s) {
  if (s == "exp_smooth") return TransformKind::ExpSmooth;
  if (s == "kernel_smooth") return TransformKind::KernelSmooth;
  if (s == "linear_index") return TransformKind::LinearIndex;
  fail(ErrorCode::Config, "unknown transform kind '" + s + "'");
}

Logistic logistic(double x) {
  const double v = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  const double d1 = v * (1.0 - v);
  return {v, d1, d1 * (1.0 - 2.0 * v), d1 * (1.0 - 6.0 * v + 6.0 * v * v)};
}

namespace {

void check_finite(const Eigen::VectorXd& a) {
  require(a.allFinite(), "transform parameters must be finite");
}

double mean_of(const Eigen::Ref<const Eigen::ArrayXd>& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v(i);
  return v.size() ? s / static_cast<double>(v.size()) : 0.0;
}

}  // namespace

RawStack exp_smooth_raw(const Eigen::VectorXd& x, const ExpSmoothConfig& cfg, const Eigen::VectorXd& body, int max_deriv) {
  const int n = static_cast<int>(x.size());
  require(n >= 1, "exp_smooth needs a non-empty series");
  require(cfg.design.rows() == n, "exp_smooth design rows must match the series length");
  const int q = static_cast<int>(cfg.design.cols());
  require(body.size() == q, "exp_smooth parameter length must equal design columns + 1");
  require(max_deriv >= 0 && max_deriv <= 3, "max_deriv must lie in 0..3");
  check_finite(body);
  require(x.allFinite() && std::isfinite(cfg.z0), "exp_smooth series must be finite");

  RawStack r;
  r.order = max_deriv;
  r.val.resize(n);
  if (max_deriv >= 1) r.grad = Eigen::MatrixXd::Zero(n, q);
  if (max_deriv >= 2) r.hess = Tensor3(n, q);
  if (max_deriv >= 3) r.third = Tensor4(n, q);

  double sp = cfg.z0;
  Eigen::VectorXd gp = Eigen::VectorXd::Zero(q);
  Eigen::MatrixXd hp = Eigen::MatrixXd::Zero(q, q);
  std::vector<double> tp(static_cast<size_t>(q) * q * q, 0.0);
  Eigen::VectorXd gc(q);
  Eigen::MatrixXd hc(q, q);
  std::vector<double> tc(tp.size());
  auto T = [q](std::vector<double>& t, int j, int k, int l) -> double& { return t[(static_cast<size_t>(j) * q + k) * q + l]; };

  for (int i = 0; i < n; ++i) {
    const auto xt = cfg.design.row(i);
    const Logistic w = logistic(xt.dot(body));
    const double diff = sp - x(i);
    r.val(i) = w.v * sp + (1.0 - w.v) * x(i);
    if (max_deriv >= 1) {
      for (int j = 0; j < q; ++j) gc(j) = w.d1 * xt(j) * diff + w.v * gp(j);
    }
    if (max_deriv >= 2) {
      for (int j = 0; j < q; ++j)
        for (int k = j; k < q; ++k) {
          const double v = w.d2 * xt(j) * xt(k) * diff + w.d1 * xt(j) * gp(k) + w.d1 * xt(k) * gp(j) + w.v * hp(j, k);
          hc(j, k) = hc(k, j) = v;
        }
    }
    if (max_deriv >= 3) {
      for (int j = 0; j < q; ++j)
        for (int k = j; k < q; ++k)
          for (int l = k; l < q; ++l) {
            const double wj = w.d1 * xt(j), wk = w.d1 * xt(k), wl = w.d1 * xt(l);
            const double v = w.d3 * xt(j) * xt(k) * xt(l) * diff + w.d2 * xt(j) * xt(k) * gp(l) +
                             w.d2 * xt(j) * xt(l) * gp(k) + w.d2 * xt(k) * xt(l) * gp(j) + wj * hp(k, l) +
                             wk * hp(j, l) + wl * hp(j, k) + w.v * T(tp, j, k, l);
            T(tc, j, k, l) = T(tc, j, l, k) = T(tc, k, j, l) = T(tc, k, l, j) = T(tc, l, j, k) = T(tc, l, k, j) = v;
          }
    }
    sp = r.val(i);
    if (max_deriv >= 1) {
      gp = gc;
      r.grad.row(i) = gc.transpose();
    }
    if (max_deriv >= 2) {
      hp = hc;
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k) r.hess(i, j, k) = hc(j, k);
    }
    if (max_deriv >= 3) {
      tp = tc;
      for (int j = 0; j < q; ++j)
        for (int k = 0; k < q; ++k)
          for (int l = 0; l < q; ++l) r.third(i, j, k, l) = T(tc, j, k, l);
    }
  }
  return r;
}

RawStack kernel_smooth_raw(const KernelSmoothConfig& cfg, const Eigen::VectorXd& body, int max_deriv) {
  const int n = static_cast<int>(cfg.points.rows());
  const int d = cfg.dim();
  require(body.size() == d, "kernel_smooth parameter length must equal coordinate dimension + 1");
  require(static_cast<int>(cfg.neighbor_sets.size()) == n, "kernel_smooth needs one neighbor set per observation");
  require(cfg.ref_points.cols() == d, "kernel_smooth reference coordinates have the wrong dimension");
  require(max_deriv >= 0 && max_deriv <= 3, "max_deriv must lie in 0..3");
  check_finite(body);

  RawStack r;
  r.order = max_deriv;
  r.val.resize(n);
  if (max_deriv >= 1) r.grad = Eigen::MatrixXd::Zero(n, d);
  if (max_deriv >= 2) r.hess = Tensor3(n, d);
  if (max_deriv >= 3) r.third = Tensor4(n, d);
  const Eigen::ArrayXd prec = body.array().exp();

  for (int i = 0; i < n; ++i) {
    const auto& nb = cfg.neighbor_sets[i];
    const int m = static_cast<int>(nb.size());
    require(m > 0, "kernel_smooth neighbor set " + std::to_string(i) + " is empty");
    Eigen::MatrixXd Lj(m, d);  // first log-kernel derivatives; second and third are diagonal copies
    Eigen::ArrayXd L(m), z(m);
    bool distinct = false;
    for (int u = 0; u < m; ++u) {
      const int ref = nb[u];
      require(ref >= 0 && ref < cfg.ref_points.rows(), "kernel_smooth neighbor index out of range");
      z(u) = cfg.ref_values(ref);
      double lu = 0.0;
      for (int k = 0; k < d; ++k) {
        const double dx = cfg.points(i, k) - cfg.ref_points(ref, k);
        Lj(u, k) = -0.5 * dx * dx * prec(k);
        lu += Lj(u, k);
        if (u > 0 && cfg.ref_points(ref, k) != cfg.ref_points(nb[0], k)) distinct = true;
      }
      L(u) = lu;
    }
    if (!distinct) ++r.degenerate_rows;
    Eigen::ArrayXd kap = (L - L.maxCoeff()).exp();
    kap /= kap.sum();
    r.val(i) = (kap * z).sum();
    if (max_deriv == 0) continue;

    // A(u,j) = L^j_u - sum_f kappa_f L^j_f
    Eigen::MatrixXd A(m, d);
    Eigen::VectorXd Lbar = Lj.transpose() * kap.matrix();
    for (int j = 0; j < d; ++j) A.col(j) = Lj.col(j).array() - Lbar(j);
    Eigen::MatrixXd K1(m, d);
    for (int j = 0; j < d; ++j) K1.col(j) = kap * A.col(j).array();
    for (int j = 0; j < d; ++j) r.grad(i, j) = (K1.col(j).array() * z).sum();
    if (max_deriv == 1) continue;

    auto L2 = [&](int u, int j, int k) { return j == k ? Lj(u, j) : 0.0; };
    // second-order kappa derivatives, stored per (j,k)
    std::vector<Eigen::ArrayXd> K2(static_cast<size_t>(d) * d);
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) {
        double s1 = 0.0, s2 = 0.0;  // sum kappa^k L^j, sum kappa L^{jk}
        for (int f = 0; f < m; ++f) {
          s1 += K1(f, k) * Lj(f, j);
          s2 += kap(f) * L2(f, j, k);
        }
        Eigen::ArrayXd v(m);
        for (int u = 0; u < m; ++u) v(u) = K1(u, k) * A(u, j) + kap(u) * (L2(u, j, k) - s1 - s2);
        K2[j * d + k] = v;
      }
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) r.hess(i, j, k) = (K2[j * d + k] * z).sum();
    if (max_deriv == 2) continue;

    auto L3 = [&](int u, int j, int k, int l) { return (j == k && k == l) ? Lj(u, j) : 0.0; };
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k)
        for (int l = 0; l < d; ++l) {
          double sl_j = 0, s_jl = 0, sk_j = 0, s_jk = 0, skl_j = 0, sk_jl = 0, sl_jk = 0, s_jkl = 0;
          for (int f = 0; f < m; ++f) {
            sl_j += K1(f, l) * Lj(f, j);
            s_jl += kap(f) * L2(f, j, l);
            sk_j += K1(f, k) * Lj(f, j);
            s_jk += kap(f) * L2(f, j, k);
            skl_j += K2[k * d + l](f) * Lj(f, j);
            sk_jl += K1(f, k) * L2(f, j, l);
            sl_jk += K1(f, l) * L2(f, j, k);
            s_jkl += kap(f) * L3(f, j, k, l);
          }
          double acc = 0.0;
          for (int u = 0; u < m; ++u) {
            const double v = K2[k * d + l](u) * A(u, j) + K1(u, k) * (L2(u, j, l) - sl_j - s_jl) +
                             K1(u, l) * (L2(u, j, k) - sk_j - s_jk) +
                             kap(u) * (L3(u, j, k, l) - skl_j - sk_jl - sl_jk - s_jkl);
            acc += v * z(u);
          }
          r.third(i, j, k, l) = acc;
        }
  }
  return r;
}

TransformState standardize(TransformKind kind, const RawStack& raw, const Eigen::VectorXd& a, int max_deriv,
                           const FrozenCentre* frozen) {
  const int n = static_cast<int>(raw.val.size());
  const int q = static_cast<int>(a.size()) - 1;
  require(max_deriv <= raw.order, "raw stack lacks the requested derivative order");
  require(!frozen || max_deriv <= 1, "frozen centring supports values and gradients only");
  TransformState st;
  st.kind = kind;
  st.a = a;
  st.order = max_deriv;
  st.degenerate_rows = raw.degenerate_rows;
  const double E = std::exp(a(0));

  st.raw_mean = frozen ? frozen->mean : mean_of(raw.val.array());
  st.s_tilde = E * (raw.val.array() - st.raw_mean).matrix();
  if (raw.order >= 1) {
    st.raw_grad_mean.resize(q);
    for (int j = 0; j < q; ++j) st.raw_grad_mean(j) = frozen ? frozen->grad_mean(j) : mean_of(raw.grad.col(j).array());
  }
  if (max_deriv == 0) return st;

  st.grad.resize(n, q + 1);
  st.grad.col(0) = st.s_tilde;
  for (int j = 0; j < q; ++j) st.grad.col(j + 1) = E * (raw.grad.col(j).array() - st.raw_grad_mean(j)).matrix();
  if (max_deriv == 1) return st;

  // h(j,k) for body indices, centred and scaled
  st.hess = Tensor3(n, q + 1);
  for (int j = 0; j < q; ++j)
    for (int k = j; k < q; ++k) {
      const auto sl = raw.hess.slice(j, k);
      const Eigen::ArrayXd v = E * (sl - mean_of(sl));
      st.hess.slice(j + 1, k + 1) = v;
      st.hess.slice(k + 1, j + 1) = v;
    }
  st.hess.slice(0, 0) = st.s_tilde.array();
  for (int j = 0; j < q; ++j) {
    st.hess.slice(0, j + 1) = st.grad.col(j + 1).array();
    st.hess.slice(j + 1, 0) = st.grad.col(j + 1).array();
  }
  if (max_deriv == 2) return st;

  st.third = Tensor4(n, q + 1);
  for (int j = 0; j <= q; ++j)
    for (int k = 0; k <= q; ++k)
      for (int l = 0; l <= q; ++l) {
        int idx[3] = {j, k, l};
        int body[3];
        int nb = 0;
        for (int t : idx)
          if (t > 0) body[nb++] = t - 1;
        if (nb == 0)
          st.third.slice(j, k, l) = st.s_tilde.array();
        else if (nb == 1)
          st.third.slice(j, k, l) = st.grad.col(body[0] + 1).array();
        else if (nb == 2)
          st.third.slice(j, k, l) = st.hess.slice(body[0] + 1, body[1] + 1);
        else if (j <= k && k <= l) {
          const auto sl = raw.third.slice(body[0], body[1], body[2]);
          st.third.slice(j, k, l) = E * (sl - mean_of(sl));
        }
      }
  // fill permutations of the all-body entries
  for (int j = 1; j <= q; ++j)
    for (int k = 1; k <= q; ++k)
      for (int l = 1; l <= q; ++l) {
        int s[3] = {j, k, l};
        std::sort(s, s + 3);
        if (s[0] == j && s[1] == k && s[2] == l) continue;
        st.third.slice(j, k, l) = st.third.slice(s[0], s[1], s[2]);
      }
  return st;
}

TransformState exp_smooth_eval(const Eigen::VectorXd& x, const ExpSmoothConfig& cfg, const Eigen::VectorXd& a,
                               int max_deriv, const FrozenCentre* frozen) {
  require(a.size() == cfg.design.cols() + 1, "exp_smooth parameter length must equal design columns + 1");
  check_finite(a);
  const RawStack raw = exp_smooth_raw(x, cfg, a.tail(a.size() - 1), std::max(max_deriv, frozen ? 1 : 0));
  return standardize(TransformKind::ExpSmooth, raw, a, max_deriv, frozen);
}

TransformState kernel_smooth_eval(const KernelSmoothConfig& cfg, const Eigen::VectorXd& a, int max_deriv,
                                  const FrozenCentre* frozen) {
  require(a.size() == cfg.dim() + 1, "kernel_smooth parameter length must equal coordinate dimension + 1");
  check_finite(a);
  const RawStack raw = kernel_smooth_raw(cfg, a.tail(a.size() - 1), std::max(max_deriv, frozen ? 1 : 0));
  return standardize(TransformKind::KernelSmooth, raw, a, max_deriv, frozen);
}

TransformState linear_index_eval(const Eigen::MatrixXd& X, const Eigen::VectorXd& a, int max_deriv,
                                 const Eigen::MatrixXd* sigma_hat) {
  require(X.cols() == a.size(), "linear_index parameter length must equal design columns");
  require(max_deriv >= 0 && max_deriv <= 3, "max_deriv must lie in 0..3");
  check_finite(a);
  TransformState st;
  st.kind = TransformKind::LinearIndex;
  st.a = a;
  st.order = max_deriv;
  st.s_tilde = X * a;
  const int n = static_cast<int>(X.rows()), p = static_cast<int>(X.cols());
  st.sigma_hat = sigma_hat ? *sigma_hat : Eigen::MatrixXd(X.transpose() * X / std::max(1, n));
  if (max_deriv >= 1) st.grad = X;
  if (max_deriv >= 2) st.hess = Tensor3(n, p);
  if (max_deriv >= 3) st.third = Tensor4(n, p);
  return st;
}

ScalingPenalty scaling_penalty_general(const TransformState& st, double c, const Eigen::VectorXd* v) {
  require(c > 0.0, "target variance c must be positive");
  require(!v || st.order >= 3, "scaling penalty rho-derivative needs third-order transform stacks");
  const int n = st.n(), p = st.p();
  const double nn = n;
  const Eigen::ArrayXd s = st.s_tilde.array() - mean_of(st.s_tilde.array());
  ScalingPenalty q;
  q.c = c;
  q.variance = s.square().sum() / nn;
  const double dv = q.variance - c;
  q.value = dv * dv;
  if (st.order < 1) return q;
  Eigen::MatrixXd U = st.grad;
  for (int j = 0; j < p; ++j) U.col(j).array() -= mean_of(U.col(j).array());
  const Eigen::VectorXd qv = U.transpose() * s.matrix();
  q.grad = 4.0 / nn * dv * qv;
  if (st.order < 2) return q;
  const Eigen::MatrixXd C = U.transpose() * U;
  const Eigen::MatrixXd P = st.hess.contract(s);
  const Eigen::MatrixXd CP = C + P;
  q.hess = 8.0 / (nn * nn) * qv * qv.transpose() + 4.0 / nn * dv * CP;
  if (v) {
    require(v->size() == p, "da_drho has the wrong length");
    const Eigen::VectorXd CPv = CP * *v;
    Eigen::MatrixXd H = 8.0 / (nn * nn) * (CPv * qv.transpose() + qv * CPv.transpose() + qv.dot(*v) * CP);
    if (!st.hess.empty()) {
      Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, p);
      for (int j = 0; j < p; ++j)
        for (int l = 0; l < p; ++l) Z.col(j).array() += st.hess.slice(j, l) * (*v)(l);
      const Eigen::ArrayXd Uv = (U * *v).array();
      Eigen::MatrixXd T3 = Eigen::MatrixXd::Zero(p, p);
      if (!st.third.empty()) {
        for (int j = 0; j < p; ++j)
          for (int k = j; k < p; ++k) {
            double acc = 0.0;
            for (int l = 0; l < p; ++l) acc += (*v)(l) * (s * st.third.slice(j, k, l)).sum();
            T3(j, k) = T3(k, j) = acc;
          }
      }
      const Eigen::MatrixXd ZU = Z.transpose() * U;
      H += 4.0 / nn * dv * (ZU + ZU.transpose() + st.hess.contract(Uv) + T3);
    }
    q.hess_rho = H;
  }
  return q;
}

ScalingPenalty scaling_penalty_eval(const TransformState& st, double c, const Eigen::VectorXd* v) {
  require(c > 0.0, "target variance c must be positive");
  if (!st.linear()) return scaling_penalty_general(st, c, v);
  const Eigen::MatrixXd& S = st.sigma_hat;
  require(S.rows() == st.p(), "linear_index state lacks its design covariance");
  ScalingPenalty q;
  q.c = c;
  const Eigen::VectorXd Sa = S * st.a;
  q.variance = st.a.dot(Sa);
  const double dv = q.variance - c;
  q.value = dv * dv;
  q.grad = 4.0 * dv * Sa;
  q.hess = 8.0 * Sa * Sa.transpose() + 4.0 * dv * S;
  if (v) {
    require(v->size() == st.p(), "da_drho has the wrong length");
    const Eigen::VectorXd Sv = S * *v;
    q.hess_rho = 8.0 * (Sa * Sv.transpose() + Sv * Sa.transpose() + st.a.dot(Sv) * S);
  }
  return q;
}

}  // namespace nestgam
