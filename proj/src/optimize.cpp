#include "nestgam/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

#include "nestgam/error.hpp"

namespace nestgam {

namespace {

const double kLog2Pi = std::log(2.0 * M_PI);

std::optional<double> try_value(Evaluator& ev, const Eigen::VectorXd& z, const Eigen::VectorXd& rho) {
  if (!z.allFinite()) return std::nullopt;
  try {
    ev.set(z, 0);
    const double v = assemble(ev, rho, 0).value;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Numeric) return std::nullopt;
    throw;
  }
}

}  // namespace

NegHessianFactor factor_neg_hessian(const Eigen::MatrixXd& Hn) {
  NegHessianFactor f;
  f.dim = static_cast<int>(Hn.rows());
  f.llt.compute(Hn);
  if (f.llt.info() == Eigen::Success) return f;
  const double base = std::max(1.0, Hn.cwiseAbs().rowwise().sum().maxCoeff()) * 1e-12;
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(f.dim, f.dim);
  for (int k = 0; k <= 24; ++k) {
    const double tau = base * std::pow(10.0, k);
    f.llt.compute(Hn + tau * I);
    if (f.llt.info() == Eigen::Success) {
      f.tau = tau;
      return f;
    }
  }
  fail(ErrorCode::Numeric, "negative Hessian could not be made positive definite");
}

NewtonReport newton_map(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_init,
                        const NewtonOptions& opt) {
  require(zeta_init.size() == model.p, "initial coefficients have the wrong length");
  require(opt.frozen.empty() || static_cast<int>(opt.frozen.size()) == model.p, "frozen mask has the wrong length");
  std::vector<int> active;
  for (int i = 0; i < model.p; ++i)
    if (opt.frozen.empty() || !opt.frozen[i]) active.push_back(i);
  const int pa = static_cast<int>(active.size());

  NewtonReport rep;
  Eigen::VectorXd z = zeta_init;
  Evaluator ev(model);
  for (int it = 0;; ++it) {
    ev.set(z, 2);
    const PosteriorEval pe = assemble(ev, rho, 2);
    rep.value = pe.value;
    Eigen::VectorXd g(pa);
    Eigen::MatrixXd Hn(pa, pa);
    for (int i = 0; i < pa; ++i) {
      g(i) = pe.gradient(active[i]);
      for (int j = 0; j < pa; ++j) Hn(i, j) = -pe.hessian(active[i], active[j]);
    }
    const double scale = std::max(1.0, std::abs(pe.value));
    rep.final_grad_norm = pa ? g.cwiseAbs().maxCoeff() : 0.0;
    const bool small = rep.final_grad_norm < opt.tol * scale;
    if (pa == 0) {
      rep.converged = true;
      break;
    }
    if (!small && it >= opt.max_iter) {
      rep.message = "Newton iteration limit reached";
      break;
    }
    const NegHessianFactor f = factor_neg_hessian(Hn);
    rep.hessian_perturbation = f.tau;
    const Eigen::VectorXd delta = f.llt.solve(g);
    const double predicted = g.dot(delta);
    if (small || predicted < 1e-14 * scale) {
      // one uncounted correction step: the change in L is below what the objective can resolve,
      // but the step is still accurate because it comes from the gradient
      Eigen::VectorXd zn = z;
      for (int i = 0; i < pa; ++i) zn(active[i]) += delta(i);
      const auto v = try_value(ev, zn, rho);
      if (v && *v >= pe.value - 1e-10 * scale) z = zn;
      rep.converged = true;
      break;
    }
    double alpha = 1.0;
    bool accepted = false;
    for (int h = 0; h < 60; ++h, alpha *= 0.5) {
      Eigen::VectorXd zn = z;
      for (int i = 0; i < pa; ++i) zn(active[i]) += alpha * delta(i);
      const auto v = try_value(ev, zn, rho);
      if (v && *v > pe.value) {
        z = zn;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (predicted < 1e-9 * scale) {
        rep.converged = true;
        rep.message = "converged at roundoff level";
      } else {
        rep.message = "step halving failed to increase the log-posterior";
      }
      break;
    }
    rep.iterations = it + 1;
  }
  rep.zeta = z;
  return rep;
}

std::vector<Eigen::VectorXd> dzeta_drho_all(const NegHessianFactor& f, const Model& model,
                                            const Eigen::VectorXd& zeta_hat, const Eigen::VectorXd& rho) {
  std::vector<Eigen::VectorXd> out;
  for (int g = 0; g < model.n_penalties(); ++g) {
    const auto& b = model.penalties[g];
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(model.p);
    rhs.segment(b.start, b.size) = -std::exp(rho(g)) * (b.S * zeta_hat.segment(b.start, b.size));
    out.push_back(rhs.isZero(0.0) ? rhs : Eigen::VectorXd(f.llt.solve(rhs)));
  }
  return out;
}

Eigen::VectorXd dzeta_drho(const Model& model, const Eigen::VectorXd& zeta_hat, const Eigen::VectorXd& rho, int g) {
  require(g >= 0 && g < model.n_penalties(), "penalty index out of range");
  const NegHessianFactor f = factor_neg_hessian(-hessian(model, zeta_hat, rho));
  return dzeta_drho_all(f, model, zeta_hat, rho)[g];
}

PenaltyLogDet penalty_log_det(const Model& model, const Eigen::VectorXd& rho) {
  const int G = model.n_penalties();
  require(rho.size() == G, "rho has the wrong length");
  PenaltyLogDet out;
  out.gradient = Eigen::VectorXd::Zero(G);
  // group penalties whose coefficient ranges overlap
  std::vector<int> comp(G);
  std::iota(comp.begin(), comp.end(), 0);
  std::function<int(int)> root = [&](int x) { return comp[x] == x ? x : comp[x] = root(comp[x]); };
  for (int a = 0; a < G; ++a)
    for (int b = a + 1; b < G; ++b) {
      const auto& A = model.penalties[a];
      const auto& B = model.penalties[b];
      if (A.start < B.start + B.size && B.start < A.start + A.size) comp[root(a)] = root(b);
    }
  for (int r = 0; r < G; ++r) {
    if (root(r) != r) continue;
    std::vector<int> members;
    int lo = model.p, hi = 0;
    for (int g = 0; g < G; ++g)
      if (root(g) == r) {
        members.push_back(g);
        lo = std::min(lo, model.penalties[g].start);
        hi = std::max(hi, model.penalties[g].start + model.penalties[g].size);
      }
    const int d = hi - lo;
    auto embed = [&](int g) {
      Eigen::MatrixXd S = Eigen::MatrixXd::Zero(d, d);
      const auto& b = model.penalties[g];
      S.block(b.start - lo, b.start - lo, b.size, b.size) = b.S;
      return S;
    };
    if (members.size() == 1) {
      const int g = members[0];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.penalties[g].S);
      const auto& ev = es.eigenvalues();
      const double thr = 1e-10 * ev.cwiseAbs().maxCoeff();
      int rank = 0;
      double ld = 0.0;
      for (int i = 0; i < ev.size(); ++i)
        if (ev(i) > thr) {
          ++rank;
          ld += std::log(ev(i));
        }
      out.value += rank * rho(g) + ld;
      out.gradient(g) += rank;
      out.rank += rank;
      continue;
    }
    Eigen::MatrixXd Ssum = Eigen::MatrixXd::Zero(d, d);
    for (int g : members) Ssum += embed(g) / model.penalties[g].S.norm();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Ssum);
    const auto& ev = es.eigenvalues();
    const double thr = 1e-10 * ev.cwiseAbs().maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < ev.size(); ++i)
      if (ev(i) > thr) keep.push_back(i);
    Eigen::MatrixXd U(d, keep.size());
    for (size_t i = 0; i < keep.size(); ++i) U.col(i) = es.eigenvectors().col(keep[i]);
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(U.cols(), U.cols());
    std::vector<Eigen::MatrixXd> parts;
    for (int g : members) {
      parts.push_back(std::exp(rho(g)) * U.transpose() * embed(g) * U);
      A += parts.back();
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    require(llt.info() == Eigen::Success, "penalty range-space matrix is not positive definite", ErrorCode::Numeric);
    out.value += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    for (size_t i = 0; i < members.size(); ++i) out.gradient(members[i]) += llt.solve(parts[i]).trace();
    out.rank += static_cast<int>(keep.size());
  }
  return out;
}

LamlEval laml_at(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_hat, bool gradient,
                 const GammaOptions& gopt) {
  LamlEval out;
  Evaluator ev(model);
  ev.set(zeta_hat, gradient ? 3 : 2);
  const PosteriorEval pe = assemble(ev, rho, 2);
  const NegHessianFactor f = factor_neg_hessian(-pe.hessian);
  out.hessian_perturbation = f.tau;
  out.usable = f.tau == 0.0;
  const double logdetH = 2.0 * f.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const PenaltyLogDet pld = penalty_log_det(model, rho);
  out.null_space_dim = model.p - pld.rank;
  out.log_posterior = pe.value;
  out.half_log_det_S = 0.5 * pld.value;
  out.neg_half_log_det_H = -0.5 * logdetH;
  out.null_space_term = 0.5 * out.null_space_dim * kLog2Pi;
  out.value = out.log_posterior + out.half_log_det_S + out.neg_half_log_det_H + out.null_space_term;
  if (!gradient) return out;
  const std::vector<Eigen::VectorXd> dz = dzeta_drho_all(f, model, zeta_hat, rho);
  const std::vector<Eigen::MatrixXd> dH = hessian_rho_derivs(ev, rho, dz, gopt);
  const Eigen::MatrixXd Hinv = f.llt.solve(Eigen::MatrixXd::Identity(model.p, model.p));
  out.gradient.resize(model.n_penalties());
  for (int g = 0; g < model.n_penalties(); ++g) {
    const auto& b = model.penalties[g];
    const Eigen::VectorXd zg = zeta_hat.segment(b.start, b.size);
    // d(negative Hessian)/drho = -dH
    out.gradient(g) = -0.5 * std::exp(rho(g)) * zg.dot(b.S * zg) + 0.5 * pld.gradient(g) +
                      0.5 * (Hinv.array() * dH[g].array()).sum();
  }
  return out;
}

LamlEval laml(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_init, bool gradient,
              Eigen::VectorXd* zeta_out, const NewtonOptions& nopt) {
  const NewtonReport nr = newton_map(model, rho, zeta_init, nopt);
  LamlEval out = laml_at(model, rho, nr.zeta, gradient);
  if (!nr.converged) out.usable = false;
  if (zeta_out) *zeta_out = nr.zeta;
  return out;
}

Eigen::VectorXd default_rho_init(const Model& model, const Eigen::VectorXd& zeta) {
  Evaluator ev(model);
  ev.set(zeta, 2);
  const Eigen::MatrixXd Hn = -loglik_hessian(ev);
  Eigen::VectorXd rho = Eigen::VectorXd::Zero(model.n_penalties());
  for (int g = 0; g < model.n_penalties(); ++g) {
    const auto& b = model.penalties[g];
    const double th = Hn.block(b.start, b.start, b.size, b.size).trace();
    const double ts = b.S.trace();
    if (th > 0 && ts > 0 && std::isfinite(th)) rho(g) = std::clamp(std::log(th / ts), -10.0, 10.0);
  }
  return rho;
}

void freeze_centring(Model& model, const Eigen::VectorXd& zeta) {
  for (size_t u = 0; u < model.nested.size(); ++u) {
    NestedEffect& e = model.nested[u];
    if (e.kind() == TransformKind::LinearIndex) continue;
    const Segment& si = model.segments[e.inner_seg];
    const TransformState ts = model.eval_transform(static_cast<int>(u), zeta.segment(si.start, si.len), 1);
    e.frozen = FrozenCentre{ts.raw_mean, ts.raw_grad_mean};
  }
}

namespace {

struct OuterPoint {
  Eigen::VectorXd rho, zeta, grad;
  double f = std::numeric_limits<double>::infinity();  // negative LAML
  bool ok = false;
  LamlEval laml;
  NewtonReport newton;
};

OuterPoint evaluate_outer(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zwarm,
                          const NewtonOptions& nopt) {
  OuterPoint P;
  P.rho = rho;
  try {
    P.newton = newton_map(model, rho, zwarm, nopt);
    P.zeta = P.newton.zeta;
    if (!P.newton.converged) return P;
    P.laml = laml_at(model, rho, P.zeta, true);
    P.f = -P.laml.value;
    P.grad = -P.laml.gradient;
    P.ok = std::isfinite(P.f) && P.grad.allFinite();
  } catch (const Error& e) {
    if (e.code() != ErrorCode::Numeric) throw;
  }
  return P;
}

Eigen::VectorXd projected(const Eigen::VectorXd& rho, const Eigen::VectorXd& g) {
  Eigen::VectorXd pg = g;
  for (int i = 0; i < rho.size(); ++i) {
    if (rho(i) >= kRhoBound - 1e-12 && g(i) < 0) pg(i) = 0;
    if (rho(i) <= -kRhoBound + 1e-12 && g(i) > 0) pg(i) = 0;
  }
  return pg;
}

}  // namespace

FitResult fit(Model& model) {
  const FitOptions& fo = model.spec.fit;
  FitResult R;
  const int G = model.n_penalties();
  NewtonOptions nopt;
  nopt.max_iter = fo.max_newton;
  nopt.tol = fo.newton_tol;

  Eigen::VectorXd z = model.initial_zeta();
  Eigen::VectorXd rho;
  if (fo.rho_init) {
    require(static_cast<int>(fo.rho_init->size()) == G,
            "rho_init needs " + std::to_string(G) + " entries", ErrorCode::Config);
    rho = Eigen::Map<const Eigen::VectorXd>(fo.rho_init->data(), G);
  } else {
    rho = default_rho_init(model, z);
  }
  rho = rho.cwiseMax(-kRhoBound).cwiseMin(kRhoBound);

  if (!model.nested.empty()) {
    NewtonOptions staged = nopt;
    staged.frozen.assign(model.p, false);
    for (const auto& e : model.nested) {
      const Segment& si = model.segments[e.inner_seg];
      for (int i = 0; i < si.len; ++i) staged.frozen[si.start + i] = true;
    }
    z = newton_map(model, rho, z, staged).zeta;
  }

  if (G == 0 || fo.fixed_rho) {
    R.newton = newton_map(model, rho, z, nopt);
    R.zeta = R.newton.zeta;
    R.rho = rho;
    R.laml = laml_at(model, rho, R.zeta, G > 0);
    R.converged = R.newton.converged;
    if (!R.converged) R.message = R.newton.message;
    freeze_centring(model, R.zeta);
    return R;
  }

  OuterPoint cur = evaluate_outer(model, rho, z, nopt);
  require(cur.ok, "inner Newton fit failed at the initial smoothing parameters: " + cur.newton.message,
          ErrorCode::NotConverged);
  Eigen::MatrixXd Binv = Eigen::MatrixXd::Identity(G, G);
  int small_changes = 0;
  bool first_update = true;
  R.trace.push_back({0, -cur.f, projected(cur.rho, cur.grad).cwiseAbs().maxCoeff(), cur.rho});
  for (int k = 1; k <= fo.max_outer; ++k) {
    const Eigen::VectorXd pg = projected(cur.rho, cur.grad);
    if (pg.cwiseAbs().maxCoeff() < fo.outer_grad_tol) {
      R.converged = true;
      break;
    }
    Eigen::VectorXd d = -Binv * pg;
    for (int i = 0; i < G; ++i)
      if (pg(i) == 0) d(i) = 0;
    if (d.dot(pg) >= 0) {
      Binv.setIdentity();
      d = -pg;
    }
    // keep the step inside the box and limit its size
    double amax = 1e10;
    for (int i = 0; i < G; ++i) {
      if (d(i) > 0) amax = std::min(amax, (kRhoBound - cur.rho(i)) / d(i));
      if (d(i) < 0) amax = std::min(amax, (-kRhoBound - cur.rho(i)) / d(i));
    }
    const double dn = d.cwiseAbs().maxCoeff();
    if (dn > 5.0) d *= 5.0 / dn, amax *= dn / 5.0;
    const double gd0 = pg.dot(d);
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double alpha = std::min(1.0, amax);
    OuterPoint best;
    bool found = false;
    for (int ls = 0; ls < 30; ++ls) {
      OuterPoint P = evaluate_outer(model, cur.rho + alpha * d, cur.zeta, nopt);
      if (!P.ok || P.f > cur.f + 1e-4 * alpha * gd0) {
        hi = alpha;
        alpha = 0.5 * (lo + hi);
        continue;
      }
      best = P;
      found = true;
      const double gd = P.grad.dot(d);
      if (gd < 0.9 * gd0 && alpha < amax) {
        lo = alpha;
        alpha = std::isfinite(hi) ? 0.5 * (lo + hi) : std::min(2.0 * alpha, amax);
        continue;
      }
      break;
    }
    if (!found) {
      R.message = "line search failed to improve LAML";
      R.converged = projected(cur.rho, cur.grad).cwiseAbs().maxCoeff() < 1e-3;
      break;
    }
    const Eigen::VectorXd s = best.rho - cur.rho;
    const Eigen::VectorXd y = best.grad - cur.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (first_update) {
        Binv = Eigen::MatrixXd::Identity(G, G) * (sy / y.dot(y));
        first_update = false;
      }
      const double r = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(G, G);
      Binv = (I - r * s * y.transpose()) * Binv * (I - r * y * s.transpose()) + r * s * s.transpose();
    }
    const double rel = std::abs(best.f - cur.f) / std::max(1.0, std::abs(cur.f));
    cur = best;
    R.outer_iterations = k;
    R.trace.push_back({k, -cur.f, projected(cur.rho, cur.grad).cwiseAbs().maxCoeff(), cur.rho});
    small_changes = rel < fo.outer_rel_tol ? small_changes + 1 : 0;
    if (small_changes >= 2) {
      R.converged = true;
      break;
    }
  }
  if (!R.converged && R.message.empty()) R.message = "outer iteration limit reached";
  R.zeta = cur.zeta;
  R.rho = cur.rho;
  R.newton = cur.newton;
  R.laml = cur.laml;
  freeze_centring(model, R.zeta);
  return R;
}

}  // namespace nestgam
