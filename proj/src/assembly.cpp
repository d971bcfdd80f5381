#include "nestgam/assembly.hpp"

#include <cmath>

#include "nestgam/error.hpp"

namespace nestgam {

Evaluator::Evaluator(const Model& model) : Evaluator(model, model.train, false) {}

Evaluator::Evaluator(const Model& model, const Design& design, bool frozen)
    : model_(&model), design_(&design), frozen_(frozen) {
  eff_.resize(model.nested.size());
  cached_a_.resize(model.nested.size());
  cached_order_.assign(model.nested.size(), -1);
  ones_ = Eigen::ArrayXd::Ones(design.n);
}

double Evaluator::scaling_total() const {
  double s = 0.0;
  if (frozen_) return s;
  for (const auto& e : eff_) s += e.q.value;
  return s;
}

void Evaluator::set(const Eigen::VectorXd& zeta, int order) {
  const Model& M = *model_;
  require(zeta.size() == M.p, "coefficient vector has the wrong length");
  require(zeta.allFinite(), "coefficient vector must be finite", ErrorCode::Numeric);
  require(order >= 0 && order <= 3, "evaluation order must lie in 0..3");
  require(!frozen_ || order <= 1, "prediction-mode evaluation supports order <= 1");
  zeta_ = zeta;
  order_ = order;
  const int n = design_->n;

  for (size_t u = 0; u < M.nested.size(); ++u) {
    const NestedEffect& ne = M.nested[u];
    const Segment& si = M.segments[ne.inner_seg];
    const Segment& so = M.segments[ne.outer_seg];
    const Eigen::VectorXd a = zeta.segment(si.start, si.len);
    EffectEval& E = eff_[u];
    const bool reuse = cached_order_[u] >= order && cached_a_[u].size() == a.size() && cached_a_[u] == a;
    if (reuse) {
      ++cache_hits_;
    } else {
      const FrozenCentre* fc = nullptr;
      if (frozen_ && ne.kind() != TransformKind::LinearIndex) {
        require(ne.frozen.has_value(), "nested effect '" + ne.name + "' has no frozen centring statistics");
        fc = &*ne.frozen;
      }
      E.ts = M.eval_transform(static_cast<int>(u), design_->inputs[u], a, order, fc);
      E.B.clear();
      for (int r = 0; r <= std::max(order, 1); ++r) E.B.push_back(ne.outer.eval(E.ts.s_tilde, r));
      cached_a_[u] = a;
      cached_order_[u] = order;
    }
    const Eigen::VectorXd b = zeta.segment(so.start, so.len);
    E.e = (E.B[1] * b).array();
    E.f = order >= 2 ? Eigen::ArrayXd((E.B[2] * b).array()) : Eigen::ArrayXd();
    E.g = order >= 3 ? Eigen::ArrayXd((E.B[3] * b).array()) : Eigen::ArrayXd();
    if (!frozen_) E.q = scaling_penalty_eval(E.ts, M.spec.c);
  }

  eta_.clear();
  for (int j = 0; j < M.m; ++j) eta_.push_back(Eigen::ArrayXd::Constant(n, M.spec.predictors[j].offset));
  for (size_t t = 0; t < M.gamma.size(); ++t) {
    const Segment& s = M.segments[M.gamma[t].segment];
    eta_[s.predictor] += (design_->Z[t] * zeta.segment(s.start, s.len)).array();
  }
  for (size_t u = 0; u < M.nested.size(); ++u) {
    const Segment& s = M.segments[M.nested[u].outer_seg];
    eta_[s.predictor] += (eff_[u].B[0] * zeta.segment(s.start, s.len)).array();
  }
  std::vector<LinkDerivs> L;
  theta_.clear();
  for (int j = 0; j < M.m; ++j) {
    L.push_back(link_eval(M.links[j], eta_[j]));
    theta_.push_back(L.back().theta);
  }
  if (!design_->has_y) {
    loglik_ = 0.0;
    return;
  }
  if (!M.family->valid(theta_)) fail(ErrorCode::Numeric, "distribution parameters left the valid region");
  const FamilyDerivs fd = M.family->derivs(design_->y, theta_, std::max(order, 0));
  pd_ = chain_to_eta(fd, L);
  loglik_ = pd_.ll.sum();
}

PVar Evaluator::pvar(int seg) const {
  const Segment& s = model_->segments[seg];
  if (s.kind == SegKind::Inner) return {true, s.effect};
  return {false, s.predictor};
}

const Eigen::MatrixXd& Evaluator::M(int seg) const {
  const Segment& s = model_->segments[seg];
  switch (s.kind) {
    case SegKind::Gamma: return design_->Z[s.term];
    case SegKind::Outer: return eff_[s.effect].B[0];
    case SegKind::Inner: return eff_[s.effect].ts.grad;
  }
  fail(ErrorCode::Internal, "unknown segment kind");
}

int Evaluator::predictor_of(const PVar& x) const { return x.is_t ? model_->nested[x.idx].predictor : x.idx; }

const Eigen::ArrayXd* Evaluator::dvar(const PVar& x, int r) const {
  if (!x.is_t) return r == 1 ? &ones_ : nullptr;
  const EffectEval& E = eff_[x.idx];
  if (r == 1) return &E.e;
  if (r == 2) return E.f.size() ? &E.f : nullptr;
  return E.g.size() ? &E.g : nullptr;
}

Eigen::ArrayXd Evaluator::D1(const PVar& x) const {
  return pd_.d1[predictor_of(x)] * *dvar(x, 1);
}

Eigen::ArrayXd Evaluator::D2(const PVar& x, const PVar& y) const {
  const int jx = predictor_of(x), jy = predictor_of(y);
  Eigen::ArrayXd v = pd_.d2[jx][jy];
  if (x.is_t) v *= *dvar(x, 1);
  if (y.is_t) v *= *dvar(y, 1);
  if (x == y && x.is_t) {
    require(dvar(x, 2) != nullptr, "second outer derivative not evaluated");
    v += pd_.d1[jx] * *dvar(x, 2);
  }
  return v;
}

Eigen::ArrayXd Evaluator::D3(const PVar& x, const PVar& y, const PVar& z) const {
  const int jx = predictor_of(x), jy = predictor_of(y), jz = predictor_of(z);
  Eigen::ArrayXd v = pd_.d3[jx][jy][jz];
  if (x.is_t) v *= *dvar(x, 1);
  if (y.is_t) v *= *dvar(y, 1);
  if (z.is_t) v *= *dvar(z, 1);
  auto pair_term = [&](const PVar& a, int ja, int jb, const PVar& c) {
    // a == b is a t-variable; c is the remaining one
    Eigen::ArrayXd w = pd_.d2[ja][jb] * *dvar(a, 2);
    if (c.is_t) w *= *dvar(c, 1);
    return w;
  };
  if (x == y && x.is_t) v += pair_term(x, jx, jz, z);
  if (x == z && x.is_t) v += pair_term(x, jx, jy, y);
  if (y == z && y.is_t) v += pair_term(y, jy, jx, x);
  if (x == y && y == z && x.is_t) {
    require(dvar(x, 3) != nullptr, "third outer derivative not evaluated");
    v += pd_.d1[jx] * *dvar(x, 3);
  }
  return v;
}

namespace {

/// A' diag(w) B
Eigen::MatrixXd wprod(const Eigen::MatrixXd& A, const Eigen::ArrayXd& w, const Eigen::MatrixXd& B) {
  return A.transpose() * (B.array().colwise() * w).matrix();
}

void place(Eigen::MatrixXd& H, const Model& M, int r, int c, const Eigen::MatrixXd& blk) {
  const Segment& sr = M.segments[r];
  const Segment& sc = M.segments[c];
  H.block(sr.start, sc.start, sr.len, sc.len) += blk;
  if (r != c) H.block(sc.start, sr.start, sc.len, sr.len) += blk.transpose();
}

}  // namespace

Eigen::VectorXd loglik_gradient(const Evaluator& ev) {
  const Model& M = ev.model();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(M.p);
  for (size_t s = 0; s < M.segments.size(); ++s) {
    const Segment& seg = M.segments[s];
    g.segment(seg.start, seg.len) = ev.M(static_cast<int>(s)).transpose() * ev.D1(ev.pvar(static_cast<int>(s))).matrix();
  }
  return g;
}

Eigen::MatrixXd loglik_hessian(const Evaluator& ev) {
  require(ev.order() >= 2, "Hessian needs an order-2 evaluation");
  const Model& M = ev.model();
  const int S = static_cast<int>(M.segments.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(M.p, M.p);
  for (int s2 = 0; s2 < S; ++s2)
    for (int s1 = 0; s1 <= s2; ++s1) {
      int r = s2, c = s1;
      const Segment& a = M.segments[s1];
      const Segment& b = M.segments[s2];
      // same-effect outer/inner pair: rows outer, columns inner
      if (a.effect >= 0 && a.effect == b.effect && a.kind != b.kind) {
        r = M.nested[a.effect].outer_seg;
        c = M.nested[a.effect].inner_seg;
      }
      Eigen::MatrixXd blk = wprod(ev.M(r), ev.D2(ev.pvar(r), ev.pvar(c)), ev.M(c));
      if (r == c && M.segments[r].kind == SegKind::Inner && !M.segments[r].linear) {
        const EffectEval& E = ev.effect(M.segments[r].effect);
        blk += E.ts.hess.contract(ev.D1(ev.pvar(r)));
      }
      if (r != c && M.segments[r].kind == SegKind::Outer && M.segments[c].kind == SegKind::Inner &&
          M.segments[r].effect == M.segments[c].effect) {
        const EffectEval& E = ev.effect(M.segments[r].effect);
        blk += wprod(E.B[1], ev.D1(ev.pvar(r)), ev.M(c));
      }
      place(H, M, r, c, blk);
    }
  return H;
}

PosteriorEval assemble(const Evaluator& ev, const Eigen::VectorXd& rho, int order) {
  const Model& M = ev.model();
  require(rho.size() == M.n_penalties(), "rho has the wrong length");
  require(ev.order() >= order, "evaluator order below the requested assembly order");
  const Eigen::VectorXd& z = ev.zeta();
  PosteriorEval pe;
  pe.loglik = ev.loglik();
  for (int g = 0; g < M.n_penalties(); ++g) {
    const auto& b = M.penalties[g];
    const Eigen::VectorXd zg = z.segment(b.start, b.size);
    pe.penalty_value += 0.5 * std::exp(rho(g)) * zg.dot(b.S * zg);
  }
  double qsum = 0.0;
  for (size_t u = 0; u < M.nested.size(); ++u) {
    pe.scaling_penalty_values.push_back(ev.effect(static_cast<int>(u)).q.value);
    qsum += ev.effect(static_cast<int>(u)).q.value;
  }
  pe.value = pe.loglik - pe.penalty_value - qsum;
  if (order < 1) return pe;
  const Eigen::MatrixXd Sl = M.S_lambda(rho);
  pe.gradient = loglik_gradient(ev) - Sl * z;
  for (size_t u = 0; u < M.nested.size(); ++u) {
    const Segment& si = M.segments[M.nested[u].inner_seg];
    pe.gradient.segment(si.start, si.len) -= ev.effect(static_cast<int>(u)).q.grad;
  }
  if (order < 2) return pe;
  pe.hessian = loglik_hessian(ev) - Sl;
  for (size_t u = 0; u < M.nested.size(); ++u) {
    const Segment& si = M.segments[M.nested[u].inner_seg];
    pe.hessian.block(si.start, si.start, si.len, si.len) -= ev.effect(static_cast<int>(u)).q.hess;
  }
  return pe;
}

PosteriorEval log_posterior(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, int order) {
  Evaluator ev(model);
  ev.set(zeta, order);
  return assemble(ev, rho, order);
}

Eigen::VectorXd gradient(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho) {
  return log_posterior(model, zeta, rho, 1).gradient;
}

Eigen::MatrixXd hessian(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho) {
  return log_posterior(model, zeta, rho, 2).hessian;
}

}  // namespace nestgam
