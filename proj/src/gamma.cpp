#include <cmath>

#include "nestgam/assembly.hpp"
#include "nestgam/error.hpp"

namespace nestgam {

std::string to_string(GammaRule r) {
  switch (r) {
    case GammaRule::General: return "general";
    case GammaRule::BetaAlphaAlpha: return "beta|alpha.alpha";
    case GammaRule::AlphaBetaBeta: return "alpha|beta.beta";
    case GammaRule::ABB: return "a|b.b";
    case GammaRule::Psi3AlphaBeta: return "psi3|alpha.beta";
    case GammaRule::AlphaAlphaBeta: return "alpha|alpha.beta";
    case GammaRule::BetaAlphaBeta: return "beta|alpha.beta";
    case GammaRule::Psi3AB: return "psi3|a.b";
    case GammaRule::BAB: return "b|a.b";
    case GammaRule::AAB: return "a|a.b";
    case GammaRule::AAA: return "a|a.a";
    case GammaRule::BAA: return "b|a.a";
    case GammaRule::Psi3AA: return "psi3|a.a";
    case GammaRule::AAPsi2: return "a|a.psi2";
    case GammaRule::BetaPsi1Alpha: return "beta|psi1.alpha";
    case GammaRule::BPsi1A: return "b|psi1.a";
    case GammaRule::AlphaPsi1Beta: return "alpha|psi1.beta";
    case GammaRule::APsi1B: return "a|psi1.b";
  }
  return "?";
}

std::vector<GammaRule> exceptional_rules() {
  std::vector<GammaRule> out;
  for (int i = 1; i < kNumGammaRules; ++i) out.push_back(static_cast<GammaRule>(i));
  return out;
}

namespace {

enum class Kind { Gamma, Outer, Inner };

struct RouteKey {
  // relation of the pair to the effect owning the direction segment
  enum class Pair { SameInnerInner, SameOuterOuter, SameOuterInner, OtherSameInnerInner, OtherSameOuterOuter,
                    OtherSameOuterInner, OneInner, OneOuter, Unrelated };
  Pair pair;
  Kind dir;  // kind of the direction segment relative to that effect (Gamma when unrelated)
  bool linear;
};

struct RouteEntry {
  RouteKey::Pair pair;
  Kind dir;
  GammaRule nonlinear, linear;
};

// clang-format off
const RouteEntry kTable[] = {
  {RouteKey::Pair::SameInnerInner,      Kind::Inner, GammaRule::AAA,    GammaRule::General},
  {RouteKey::Pair::SameInnerInner,      Kind::Outer, GammaRule::BAA,    GammaRule::BetaAlphaAlpha},
  {RouteKey::Pair::OtherSameInnerInner, Kind::Gamma, GammaRule::Psi3AA, GammaRule::General},
  {RouteKey::Pair::SameOuterOuter,      Kind::Inner, GammaRule::ABB,    GammaRule::AlphaBetaBeta},
  {RouteKey::Pair::SameOuterOuter,      Kind::Outer, GammaRule::General, GammaRule::General},
  {RouteKey::Pair::OtherSameOuterOuter, Kind::Gamma, GammaRule::General, GammaRule::General},
  {RouteKey::Pair::SameOuterInner,      Kind::Inner, GammaRule::AAB,    GammaRule::AlphaAlphaBeta},
  {RouteKey::Pair::SameOuterInner,      Kind::Outer, GammaRule::BAB,    GammaRule::BetaAlphaBeta},
  {RouteKey::Pair::OtherSameOuterInner, Kind::Gamma, GammaRule::Psi3AB, GammaRule::Psi3AlphaBeta},
  {RouteKey::Pair::OneInner,            Kind::Inner, GammaRule::AAPsi2, GammaRule::General},
  {RouteKey::Pair::OneInner,            Kind::Outer, GammaRule::BPsi1A, GammaRule::BetaPsi1Alpha},
  {RouteKey::Pair::OneOuter,            Kind::Inner, GammaRule::APsi1B, GammaRule::AlphaPsi1Beta},
  {RouteKey::Pair::OneOuter,            Kind::Outer, GammaRule::General, GammaRule::General},
  {RouteKey::Pair::Unrelated,           Kind::Gamma, GammaRule::General, GammaRule::General},
};
// clang-format on

Kind kind_of(const Segment& s) {
  return s.kind == SegKind::Gamma ? Kind::Gamma : (s.kind == SegKind::Outer ? Kind::Outer : Kind::Inner);
}

RouteKey make_key(const Model& M, int r, int c, int d) {
  const Segment& sr = M.segments[r];
  const Segment& sc = M.segments[c];
  const Segment& sd = M.segments[d];
  RouteKey k{RouteKey::Pair::Unrelated, Kind::Gamma, false};
  const bool same = sr.effect >= 0 && sr.effect == sc.effect;
  if (same) {
    const bool own = sd.effect == sr.effect;
    k.linear = sr.linear;
    k.dir = own ? kind_of(sd) : Kind::Gamma;
    if (r == c && sr.kind == SegKind::Inner)
      k.pair = own ? RouteKey::Pair::SameInnerInner : RouteKey::Pair::OtherSameInnerInner;
    else if (r == c)
      k.pair = own ? RouteKey::Pair::SameOuterOuter : RouteKey::Pair::OtherSameOuterOuter;
    else
      k.pair = own ? RouteKey::Pair::SameOuterInner : RouteKey::Pair::OtherSameOuterInner;
    return k;
  }
  const int w = sd.effect;
  if (w < 0) return k;
  const Segment* member = sr.effect == w ? &sr : (sc.effect == w ? &sc : nullptr);
  if (!member) return k;
  k.linear = member->linear;
  k.dir = kind_of(sd);
  k.pair = member->kind == SegKind::Inner ? RouteKey::Pair::OneInner : RouteKey::Pair::OneOuter;
  return k;
}

}  // namespace

GammaRule route_gamma(const Model& M, int r, int c, int d) {
  const RouteKey k = make_key(M, r, c, d);
  for (const auto& e : kTable)
    if (e.pair == k.pair && e.dir == k.dir) return k.linear ? e.linear : e.nonlinear;
  fail(ErrorCode::Internal, "no routing entry for segment triple");
}

namespace {

Eigen::MatrixXd wprod(const Eigen::MatrixXd& A, const Eigen::ArrayXd& w, const Eigen::MatrixXd& B) {
  return A.transpose() * (B.array().colwise() * w).matrix();
}

struct DirCache {
  std::vector<Eigen::ArrayXd> p;    // M_psi v_psi per segment
  std::vector<Eigen::ArrayXd> p1;   // outer: B1 v_b
  std::vector<Eigen::ArrayXd> p2;   // outer: B2 v_b
  std::vector<Eigen::MatrixXd> P1;  // inner: sum_k T''(.,.,k) v_k  (n x pa)
};

}  // namespace

Eigen::MatrixXd loglik_hessian_dir(const Evaluator& ev, const Eigen::VectorXd& v, const GammaOptions& opt) {
  const Model& M = ev.model();
  require(ev.order() >= 3, "rho-derivatives of the Hessian need an order-3 evaluation");
  require(v.size() == M.p, "direction has the wrong length");
  const int S = static_cast<int>(M.segments.size());
  const int n = ev.design().n;

  DirCache dc;
  dc.p.resize(S);
  dc.p1.resize(S);
  dc.p2.resize(S);
  dc.P1.resize(S);
  for (int s = 0; s < S; ++s) {
    const Segment& seg = M.segments[s];
    const Eigen::VectorXd vs = v.segment(seg.start, seg.len);
    dc.p[s] = (ev.M(s) * vs).array();
    if (seg.kind == SegKind::Outer) {
      const EffectEval& E = ev.effect(seg.effect);
      dc.p1[s] = (E.B[1] * vs).array();
      dc.p2[s] = (E.B[2] * vs).array();
    } else if (seg.kind == SegKind::Inner && !seg.linear) {
      const Tensor3& T = ev.effect(seg.effect).ts.hess;
      Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, seg.len);
      for (int j = 0; j < seg.len; ++j)
        for (int k = 0; k < seg.len; ++k) P.col(j).array() += T.slice(j, k) * vs(k);
      dc.P1[s] = P;
    }
  }
  // aggregate directional changes per primary variable
  std::vector<PVar> vars;
  std::vector<Eigen::ArrayXd> Pvar;
  for (int s = 0; s < S; ++s) {
    const PVar x = ev.pvar(s);
    size_t i = 0;
    while (i < vars.size() && !(vars[i] == x)) ++i;
    if (i == vars.size()) {
      vars.push_back(x);
      Pvar.push_back(Eigen::ArrayXd::Zero(n));
    }
    Pvar[i] += dc.p[s];
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(M.p, M.p);
  for (int s2 = 0; s2 < S; ++s2)
    for (int s1 = 0; s1 <= s2; ++s1) {
      int r = s2, c = s1;
      {
        const Segment& a = M.segments[s1];
        const Segment& b = M.segments[s2];
        if (a.effect >= 0 && a.effect == b.effect && a.kind != b.kind) {
          r = M.nested[a.effect].outer_seg;
          c = M.nested[a.effect].inner_seg;
        }
      }
      const PVar xr = ev.pvar(r), xc = ev.pvar(c);
      const Eigen::MatrixXd& Mr = ev.M(r);
      const Eigen::MatrixXd& Mc = ev.M(c);
      Eigen::ArrayXd w = Eigen::ArrayXd::Zero(n);
      for (size_t i = 0; i < vars.size(); ++i) w += ev.D3(xc, xr, vars[i]) * Pvar[i];
      Eigen::MatrixXd blk = wprod(Mr, w, Mc);

      for (int d = 0; d < S; ++d) {
        const GammaRule rule = route_gamma(M, r, c, d);
        if (rule == GammaRule::General) continue;
        if (opt.coverage) ++(*opt.coverage)[to_string(rule)];
        const Segment& sd = M.segments[d];
        const PVar xd = ev.pvar(d);
        Eigen::MatrixXd extra = Eigen::MatrixXd::Zero(blk.rows(), blk.cols());
        switch (rule) {
          case GammaRule::AAA: {
            const EffectEval& E = ev.effect(sd.effect);
            require(!E.ts.third.empty(), "block a|a.a needs third-order transform stacks for " + M.nested[sd.effect].name);
            const PVar t = xd;
            const Eigen::MatrixXd X = wprod(Mc, ev.D2(t, t), dc.P1[d]);
            extra += X + X.transpose();
            extra += E.ts.hess.contract(ev.D2(t, t) * dc.p[d]);
            const Eigen::ArrayXd l1 = ev.D1(t);
            const Eigen::VectorXd vd = v.segment(sd.start, sd.len);
            for (int j = 0; j < sd.len; ++j)
              for (int k = j; k < sd.len; ++k) {
                double acc = 0.0;
                for (int l = 0; l < sd.len; ++l) acc += vd(l) * (l1 * E.ts.third.slice(j, k, l)).sum();
                extra(j, k) += acc;
                if (k != j) extra(k, j) += acc;
              }
            break;
          }
          case GammaRule::BAA:
          case GammaRule::BetaAlphaAlpha: {
            const PVar t = xc;
            const PVar e{false, M.nested[sd.effect].predictor};
            const Eigen::ArrayXd w1 = 2.0 * ev.D2(e, t) * dc.p1[d] + ev.D1(e) * dc.p2[d];
            extra += wprod(Mc, w1, Mc);
            if (rule == GammaRule::BAA)
              extra += ev.effect(sd.effect).ts.hess.contract(ev.D2(t, e) * dc.p[d] + ev.D1(e) * dc.p1[d]);
            break;
          }
          case GammaRule::Psi3AA: {
            const PVar t = xc;
            extra += ev.effect(M.segments[c].effect).ts.hess.contract(ev.D2(t, xd) * dc.p[d]);
            break;
          }
          case GammaRule::ABB:
          case GammaRule::AlphaBetaBeta: {
            const EffectEval& E = ev.effect(sd.effect);
            const Eigen::MatrixXd X = wprod(E.B[1], ev.D2(xr, xc) * dc.p[d], Mc);
            extra += X + X.transpose();
            break;
          }
          case GammaRule::AAB:
          case GammaRule::AlphaAlphaBeta: {
            const EffectEval& E = ev.effect(sd.effect);
            const PVar t = xc, e = xr;
            extra += wprod(E.B[1], 2.0 * ev.D2(e, t) * dc.p[d], Mc);
            extra += wprod(E.B[2], ev.D1(e) * dc.p[d], Mc);
            if (rule == GammaRule::AAB) {
              extra += wprod(Mr, ev.D2(t, e), dc.P1[d]);
              extra += wprod(E.B[1], ev.D1(e), dc.P1[d]);
            }
            break;
          }
          case GammaRule::BAB:
          case GammaRule::BetaAlphaBeta: {
            const EffectEval& E = ev.effect(sd.effect);
            const PVar e = xr;
            const Eigen::ArrayXd dee = ev.D2(e, e);
            extra += wprod(Mr, dee * dc.p1[d], Mc);
            extra += wprod(E.B[1], dee * dc.p[d], Mc);
            break;
          }
          case GammaRule::Psi3AB:
          case GammaRule::Psi3AlphaBeta: {
            const EffectEval& E = ev.effect(M.segments[r].effect);
            extra += wprod(E.B[1], ev.D2(xr, xd) * dc.p[d], Mc);
            break;
          }
          case GammaRule::AAPsi2:
          case GammaRule::BPsi1A:
          case GammaRule::BetaPsi1Alpha:
          case GammaRule::APsi1B:
          case GammaRule::AlphaPsi1Beta: {
            const bool row_member = M.segments[r].effect == sd.effect;
            const int mem = row_member ? r : c;
            const int oth = row_member ? c : r;
            const PVar xo = ev.pvar(oth), xm = ev.pvar(mem);
            const EffectEval& E = ev.effect(sd.effect);
            const PVar e{false, M.nested[sd.effect].predictor};
            Eigen::MatrixXd term;  // oriented rows = oth, cols = mem except for the outer-member rules
            bool rows_are_member = false;
            if (rule == GammaRule::AAPsi2) {
              term = wprod(ev.M(oth), ev.D2(xo, xm), dc.P1[d]);
            } else if (rule == GammaRule::BPsi1A || rule == GammaRule::BetaPsi1Alpha) {
              term = wprod(ev.M(oth), ev.D2(xo, e) * dc.p1[d], ev.M(mem));
            } else {
              term = wprod(E.B[1], ev.D2(xo, e) * dc.p[d], ev.M(oth));
              rows_are_member = true;
            }
            const bool aligned = rows_are_member ? row_member : !row_member;
            extra += aligned ? term : Eigen::MatrixXd(term.transpose());
            break;
          }
          case GammaRule::General: break;
        }
        if (!opt.corrupt_rule.empty() && opt.corrupt_rule == to_string(rule)) extra *= opt.corrupt_factor;
        blk += extra;
      }
      const Segment& sr = M.segments[r];
      const Segment& sc = M.segments[c];
      H.block(sr.start, sc.start, sr.len, sc.len) += blk;
      if (r != c) H.block(sc.start, sr.start, sc.len, sr.len) += blk.transpose();
    }
  return H;
}

std::vector<Eigen::MatrixXd> hessian_rho_derivs(const Evaluator& ev, const Eigen::VectorXd& rho,
                                                const std::vector<Eigen::VectorXd>& dzeta, const GammaOptions& opt) {
  const Model& M = ev.model();
  require(static_cast<int>(dzeta.size()) == M.n_penalties(), "one dzeta/drho vector per penalty is required");
  require(rho.size() == M.n_penalties(), "rho has the wrong length");
  std::vector<Eigen::MatrixXd> out;
  for (int g = 0; g < M.n_penalties(); ++g) {
    const Eigen::VectorXd& v = dzeta[g];
    Eigen::MatrixXd H = v.isZero(0.0) ? Eigen::MatrixXd::Zero(M.p, M.p) : loglik_hessian_dir(ev, v, opt);
    const auto& b = M.penalties[g];
    H.block(b.start, b.start, b.size, b.size) -= std::exp(rho(g)) * b.S;
    for (size_t u = 0; u < M.nested.size(); ++u) {
      const Segment& si = M.segments[M.nested[u].inner_seg];
      const Eigen::VectorXd va = v.segment(si.start, si.len);
      if (va.isZero(0.0)) continue;
      const ScalingPenalty q = scaling_penalty_eval(ev.effect(static_cast<int>(u)).ts, M.spec.c, &va);
      H.block(si.start, si.start, si.len, si.len) -= *q.hess_rho;
    }
    out.push_back(H);
  }
  return out;
}

std::vector<Eigen::MatrixXd> hessian_rho_derivs(const Model& model, const Eigen::VectorXd& zeta_hat,
                                                const Eigen::VectorXd& rho, const std::vector<Eigen::VectorXd>& dzeta,
                                                const GammaOptions& opt) {
  Evaluator ev(model);
  ev.set(zeta_hat, 3);
  return hessian_rho_derivs(ev, rho, dzeta, opt);
}

}  // namespace nestgam
