#include "nestgam/inference.hpp"

#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "nestgam/assembly.hpp"
#include "nestgam/error.hpp"

namespace nestgam {

double normal_quantile(double p) {
  require(p > 0 && p < 1, "quantile level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal(), p);
}

FitState posterior(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho) {
  FitState st;
  st.zeta = zeta;
  st.rho = rho;
  Evaluator ev(model);
  ev.set(zeta, 2);
  const PosteriorEval pe = assemble(ev, rho, 2);
  st.info = -loglik_hessian(ev);
  st.neg_hessian = -pe.hessian;
  st.neg_hessian = 0.5 * (st.neg_hessian + st.neg_hessian.transpose()).eval();
  Eigen::LLT<Eigen::MatrixXd> llt(st.neg_hessian);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(st.neg_hessian);
    Eigen::Index i;
    es.eigenvalues().minCoeff(&i);
    std::string dir;
    const Eigen::VectorXd v = es.eigenvectors().col(i);
    Eigen::Index j;
    v.cwiseAbs().maxCoeff(&j);
    for (const auto& s : model.segments)
      if (j >= s.start && j < s.start + s.len) dir = s.label;
    fail(ErrorCode::Numeric, "posterior precision is not positive definite; weakest direction loads on '" + dir + "'");
  }
  st.V = llt.solve(Eigen::MatrixXd::Identity(model.p, model.p));
  st.V = 0.5 * (st.V + st.V.transpose()).eval();
  st.F = st.V * st.info;
  st.loglik = pe.loglik;
  edf_aic(model, st, pe.loglik);
  return st;
}

void edf_aic(const Model& model, FitState& st, double loglik) {
  st.edf.clear();
  for (const auto& [label, segs] : model.term_segments()) {
    TermEdf t{label, 0, 0.0};
    for (int s : segs) {
      const Segment& seg = model.segments[s];
      t.size += seg.len;
      for (int i = seg.start; i < seg.start + seg.len; ++i) t.edf += st.F(i, i);
    }
    st.edf.push_back(t);
  }
  st.edf_total = st.F.trace();
  st.loglik = loglik;
  st.aic = -2.0 * loglik + 2.0 * st.edf_total;
}

FitState make_fit_state(const Model& model, const FitResult& fr) {
  FitState st = posterior(model, fr.zeta, fr.rho);
  st.laml = fr.laml.value;
  st.converged = fr.converged;
  st.trace = fr.trace;
  return st;
}

namespace {

EffectBand finish_band(EffectBand b, const Eigen::MatrixXd& J, const Eigen::MatrixXd& Vblock, double level) {
  const Eigen::MatrixXd JV = J * Vblock;
  b.se = (JV.array() * J.array()).rowwise().sum().max(0.0).sqrt().matrix();
  const double z = normal_quantile(0.5 + 0.5 * level);
  b.lower = b.estimate - z * b.se;
  b.upper = b.estimate + z * b.se;
  b.level = level;
  return b;
}

}  // namespace

EffectBand nested_effect_band(const Model& model, const FitState& st, int effect, const DataTable& data,
                              double level) {
  require(effect >= 0 && effect < static_cast<int>(model.nested.size()), "unknown nested effect id");
  const NestedEffect& e = model.nested[effect];
  const Segment& si = model.segments[e.inner_seg];
  const Segment& so = model.segments[e.outer_seg];
  const Design d = make_design(model, data, false);
  const FrozenCentre* fc = nullptr;
  if (e.kind() != TransformKind::LinearIndex) {
    require(e.frozen.has_value(), "nested effect '" + e.name + "' has no frozen centring statistics");
    fc = &*e.frozen;
  }
  const TransformState ts = model.eval_transform(effect, d.inputs[effect], st.zeta.segment(si.start, si.len), 1, fc);
  const Eigen::VectorXd b = st.zeta.segment(so.start, so.len);
  const Eigen::MatrixXd B0 = e.outer.eval(ts.s_tilde, 0);
  const Eigen::MatrixXd B1 = e.outer.eval(ts.s_tilde, 1);
  const Eigen::VectorXd slope = B1 * b;
  // Jacobian over [a, b]
  Eigen::MatrixXd J(d.n, si.len + so.len);
  J.leftCols(si.len) = slope.asDiagonal() * ts.grad;
  J.rightCols(so.len) = B0;
  std::vector<int> idx;
  for (int i = 0; i < si.len; ++i) idx.push_back(si.start + i);
  for (int i = 0; i < so.len; ++i) idx.push_back(so.start + i);
  Eigen::MatrixXd Vab(idx.size(), idx.size());
  for (size_t r = 0; r < idx.size(); ++r)
    for (size_t c = 0; c < idx.size(); ++c) Vab(r, c) = st.V(idx[r], idx[c]);
  EffectBand band;
  band.grid = ts.s_tilde;
  band.estimate = B0 * b;
  return finish_band(band, J, Vab, level);
}

EffectBand nested_effect_grid(const Model& model, const FitState& st, int effect, const Eigen::VectorXd& grid,
                              double level) {
  require(effect >= 0 && effect < static_cast<int>(model.nested.size()), "unknown nested effect id");
  const Segment& so = model.segments[model.nested[effect].outer_seg];
  const Eigen::MatrixXd B0 = model.nested[effect].outer.eval(grid, 0);
  EffectBand band;
  band.grid = grid;
  band.estimate = B0 * st.zeta.segment(so.start, so.len);
  return finish_band(band, B0, st.V.block(so.start, so.start, so.len, so.len), level);
}

EffectBand smooth_effect_grid(const Model& model, const FitState& st, int gamma_term, const Eigen::VectorXd& grid,
                              double level) {
  require(gamma_term >= 0 && gamma_term < static_cast<int>(model.gamma.size()), "unknown term id");
  const GammaTerm& g = model.gamma[gamma_term];
  require(g.type == TermType::Smooth, "term '" + g.label + "' is not a smooth");
  const Segment& s = model.segments[g.segment];
  Eigen::MatrixXd B = g.basis.eval(grid, 0);
  if (g.centre_map.size()) B = B * g.centre_map;
  EffectBand band;
  band.grid = grid;
  band.estimate = B * st.zeta.segment(s.start, s.len);
  return finish_band(band, B, st.V.block(s.start, s.start, s.len, s.len), level);
}

Prediction predict_and_score(const Model& model, const Eigen::VectorXd& zeta, const DataTable& data) {
  for (const auto& e : model.nested)
    require(e.kind() == TransformKind::LinearIndex || e.frozen.has_value(),
            "nested effect '" + e.name + "' has no frozen centring statistics");
  const Design d = make_design(model, data, false);
  Prediction P;
  if (d.n == 0) {
    // columns were validated by make_design; nothing to evaluate
    P.eta.assign(model.m, Eigen::ArrayXd());
    P.theta.assign(model.m, Eigen::ArrayXd());
    P.scored = d.has_y;
    return P;
  }
  Evaluator ev(model, d, true);
  ev.set(zeta, 0);
  P.eta = ev.eta();
  P.theta = ev.theta();
  P.mean = model.family->mean(P.theta);
  if (!d.has_y) return P;
  P.scored = true;
  P.log_score_i = -ev.loglik_i();
  P.log_score = P.log_score_i.sum();
  P.mean_log_score = d.n ? P.log_score / d.n : 0.0;
  P.crps_i = model.family->crps(d.y, P.theta);
  P.crps = d.n ? P.crps_i.mean() : 0.0;
  const Eigen::ArrayXd r = d.y - P.mean;
  P.rmse = d.n ? std::sqrt(r.square().mean()) : 0.0;
  P.mae = d.n ? r.abs().mean() : 0.0;
  return P;
}

}  // namespace nestgam
