#include "nestgam/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nestgam/error.hpp"

namespace nestgam {

std::string TermSpec::label() const {
  switch (type) {
    case TermType::Parametric: {
      std::string s;
      for (const auto& c : columns) s += (s.empty() ? "" : "+") + c;
      return s;
    }
    case TermType::Smooth: return "s(" + smooth.column + ")";
    case TermType::Nested: return nested.name;
  }
  return "";
}

Eigen::MatrixXd GammaTerm::design(const DataTable& data) const {
  const int n = data.rows();
  if (intercept) return Eigen::MatrixXd::Ones(n, 1);
  if (type == TermType::Parametric) {
    Eigen::MatrixXd Z(n, columns.size());
    for (size_t j = 0; j < columns.size(); ++j) Z.col(j) = data.col(columns[j]);
    return Z;
  }
  const Eigen::VectorXd& x = data.col(columns[0]);
  require(x.allFinite(), "column '" + columns[0] + "' contains non-finite values", ErrorCode::Data);
  Eigen::MatrixXd B = basis.eval(x, 0);
  return centre_map.size() ? Eigen::MatrixXd(B * centre_map) : B;
}

namespace {

int numeric_null_dim(const Eigen::MatrixXd& S) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& ev = es.eigenvalues();
  const double mx = ev.cwiseAbs().maxCoeff();
  int nd = 0;
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) <= 1e-10 * mx) ++nd;
  return nd;
}

double sample_var(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  const double mu = v.mean();
  return (v.array() - mu).square().sum() / static_cast<double>(v.size());
}

std::vector<std::vector<int>> nearest_neighbors(const Eigen::MatrixXd& query, const Eigen::MatrixXd& ref, int k) {
  const int n = static_cast<int>(query.rows()), N = static_cast<int>(ref.rows());
  std::vector<std::vector<int>> out(n);
  std::vector<std::pair<double, int>> d;
  for (int i = 0; i < n; ++i) {
    d.clear();
    for (int j = 0; j < N; ++j) {
      const double dist = (query.row(i) - ref.row(j)).squaredNorm();
      if (dist > 0.0) d.emplace_back(dist, j);
    }
    const int kk = std::min<int>(k, static_cast<int>(d.size()));
    require(kk > 0, "kernel_smooth query " + std::to_string(i) + " has no non-coincident neighbors", ErrorCode::Data);
    std::partial_sort(d.begin(), d.begin() + kk, d.end());
    out[i].reserve(kk);
    for (int u = 0; u < kk; ++u) out[i].push_back(d[u].second);
  }
  return out;
}

Eigen::MatrixXd columns_of(const DataTable& data, const std::vector<std::string>& names) {
  Eigen::MatrixXd X(data.rows(), names.size());
  for (size_t j = 0; j < names.size(); ++j) {
    X.col(j) = data.col(names[j]);
    require(X.col(j).allFinite(), "column '" + names[j] + "' contains non-finite values", ErrorCode::Data);
  }
  return X;
}

NestedInput nested_input(const NestedEffect& e, const DataTable& data) {
  NestedInput in;
  const TransformSpec& t = e.tspec;
  const int n = data.rows();
  switch (t.kind) {
    case TransformKind::ExpSmooth: {
      in.series = data.col(t.column);
      require(in.series.allFinite(), "column '" + t.column + "' contains non-finite values", ErrorCode::Data);
      in.es.design.resize(n, 1 + t.design.size());
      in.es.design.col(0).setOnes();
      if (!t.design.empty()) in.es.design.rightCols(t.design.size()) = columns_of(data, t.design);
      in.es.z0 = t.z0 ? *t.z0 : (n > 0 ? in.series(0) : 0.0);
      break;
    }
    case TransformKind::KernelSmooth: {
      in.ks.points = columns_of(data, t.coords);
      in.ks.ref_points = e.ref_points;
      in.ks.ref_values = e.ref_values;
      in.ks.neighbor_sets = nearest_neighbors(in.ks.points, e.ref_points, t.n_neighbors);
      break;
    }
    case TransformKind::LinearIndex: {
      in.Xc = columns_of(data, t.columns);
      in.Xc.rowwise() -= e.col_means.transpose();
      break;
    }
  }
  return in;
}

}  // namespace

TransformState Model::eval_transform(int effect, const NestedInput& in, const Eigen::VectorXd& a, int order,
                                     const FrozenCentre* frozen) const {
  const NestedEffect& e = nested[effect];
  switch (e.kind()) {
    case TransformKind::ExpSmooth: return exp_smooth_eval(in.series, in.es, a, order, frozen);
    case TransformKind::KernelSmooth: return kernel_smooth_eval(in.ks, a, order, frozen);
    case TransformKind::LinearIndex: return linear_index_eval(in.Xc, a, order, &e.sigma_hat);
  }
  fail(ErrorCode::Internal, "unhandled transform kind");
}

TransformState Model::eval_transform(int effect, const Eigen::VectorXd& a, int order) const {
  return eval_transform(effect, train.inputs[effect], a, order, nullptr);
}

Eigen::VectorXd Model::initial_zeta() const {
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
  for (const auto& e : nested) z.segment(segments[e.inner_seg].start, segments[e.inner_seg].len) = e.a_init;
  return z;
}

Eigen::MatrixXd Model::S_embedded(int g) const {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  const auto& b = penalties[g];
  S.block(b.start, b.start, b.size, b.size) = b.S;
  return S;
}

Eigen::MatrixXd Model::S_lambda(const Eigen::VectorXd& rho) const {
  require(rho.size() == n_penalties(), "rho has the wrong length");
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (int g = 0; g < n_penalties(); ++g) {
    const auto& b = penalties[g];
    S.block(b.start, b.start, b.size, b.size) += std::exp(rho(g)) * b.S;
  }
  return S;
}

int Model::null_space_dim() const {
  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(p, p);
  for (const auto& b : penalties) S.block(b.start, b.start, b.size, b.size) += b.S / b.S.norm();
  if (p == 0) return 0;
  return numeric_null_dim(S);
}

std::vector<std::pair<std::string, std::vector<int>>> Model::term_segments() const {
  std::vector<std::pair<std::string, std::vector<int>>> out;
  for (size_t s = 0; s < segments.size(); ++s) {
    const auto& seg = segments[s];
    if (seg.kind == SegKind::Gamma) {
      out.push_back({seg.label, {static_cast<int>(s)}});
    } else if (seg.kind == SegKind::Outer) {
      out.push_back({nested[seg.effect].name, {static_cast<int>(s), nested[seg.effect].inner_seg}});
    }
  }
  return out;
}

Design make_design(const Model& model, const DataTable& data, bool require_response) {
  Design d;
  d.n = data.rows();
  for (const auto& g : model.gamma) d.Z.push_back(g.design(data));
  for (const auto& e : model.nested) d.inputs.push_back(nested_input(e, data));
  if (data.has(model.spec.response)) {
    d.y = data.col(model.spec.response).array();
    d.has_y = true;
    require(d.y.allFinite(), "response column contains non-finite values", ErrorCode::Data);
  } else {
    require(!require_response, "missing response column '" + model.spec.response + "'", ErrorCode::Data);
  }
  return d;
}

Model build(const ModelSpec& spec, const DataTable& data) {
  Model M;
  M.spec = spec;
  M.family = make_family(spec.family);
  M.m = M.family->n_params();
  require(static_cast<int>(spec.predictors.size()) == M.m,
          "family '" + spec.family + "' needs " + std::to_string(M.m) + " predictors", ErrorCode::Config);
  require(data.rows() > 0, "training data has no rows", ErrorCode::Data);
  M.knot_range = extreme_knots(spec.pi_bound, spec.c);
  const int n = data.rows();
  int pos = 0;
  auto add_segment = [&](Segment s) {
    s.start = pos;
    pos += s.len;
    M.segments.push_back(s);
    return static_cast<int>(M.segments.size()) - 1;
  };

  for (int j = 0; j < M.m; ++j) {
    const auto& ps = spec.predictors[j];
    M.links.push_back(ps.link);
    const std::string pre = ps.name + ":";
    if (ps.intercept) {
      GammaTerm g;
      g.type = TermType::Parametric;
      g.intercept = true;
      g.predictor = j;
      g.label = pre + "(Intercept)";
      Segment s{SegKind::Gamma, 0, 1, j, -1, static_cast<int>(M.gamma.size()), false, g.label};
      g.segment = add_segment(s);
      M.gamma.push_back(g);
    }
    for (const auto& t : ps.terms) {
      if (t.type == TermType::Parametric) {
        GammaTerm g;
        g.type = TermType::Parametric;
        g.predictor = j;
        g.columns = t.columns;
        g.label = pre + t.label();
        for (const auto& c : t.columns) (void)data.col(c);
        Segment s{SegKind::Gamma, 0, static_cast<int>(t.columns.size()), j, -1, static_cast<int>(M.gamma.size()),
                  false, g.label};
        g.segment = add_segment(s);
        M.gamma.push_back(g);
        if (t.ridge) {
          const int len = static_cast<int>(t.columns.size());
          M.penalties.push_back({M.segments[g.segment].start, len, Eigen::MatrixXd::Identity(len, len), 0, g.label});
        }
      } else if (t.type == TermType::Smooth) {
        const auto& sm = t.smooth;
        const Eigen::VectorXd& x = data.col(sm.column);
        require(x.allFinite(), "column '" + sm.column + "' contains non-finite values", ErrorCode::Data);
        const double lo = x.minCoeff(), hi = x.maxCoeff();
        require(hi > lo, "smooth column '" + sm.column + "' is constant", ErrorCode::Data);
        GammaTerm g;
        g.type = TermType::Smooth;
        g.predictor = j;
        g.columns = {sm.column};
        g.label = pre + t.label();
        g.basis = SplineBasis(lo, hi, sm.k, sm.degree);
        const bool centre = sm.center ? *sm.center : ps.intercept;
        PenaltyMatrix P = difference_penalty(sm.penalty_order, sm.k);
        Eigen::MatrixXd S = P.matrix;
        if (centre) {
          const Eigen::MatrixXd B = g.basis.eval(x, 0);
          g.centre_map = null_space_map(B.colwise().sum());
          S = g.centre_map.transpose() * S * g.centre_map;
        }
        const int len = centre ? sm.k - 1 : sm.k;
        Segment s{SegKind::Gamma, 0, len, j, -1, static_cast<int>(M.gamma.size()), false, g.label};
        g.segment = add_segment(s);
        M.gamma.push_back(g);
        PenaltyBlock pb{M.segments[g.segment].start, len, S, centre ? numeric_null_dim(S) : P.null_dim, g.label};
        M.penalties.push_back(pb);
      } else {
        const auto& ns = t.nested;
        NestedEffect e;
        e.name = pre + ns.name;
        e.predictor = j;
        e.tspec = ns.transform;
        e.outer = constrain_outer(SplineBasis(M.knot_range.lo, M.knot_range.hi, ns.k, ns.degree));
        const int eidx = static_cast<int>(M.nested.size());
        const bool lin = ns.transform.kind == TransformKind::LinearIndex;
        Segment so{SegKind::Outer, 0, e.outer.dim(), j, eidx, -1, lin, e.name + ":outer"};
        e.outer_seg = add_segment(so);
        PenaltyMatrix P = difference_penalty(ns.penalty_order, ns.k);
        Eigen::MatrixXd S = e.outer.constraint_map().transpose() * P.matrix * e.outer.constraint_map();
        M.penalties.push_back({M.segments[e.outer_seg].start, e.outer.dim(), S, numeric_null_dim(S), e.name + ":outer"});

        int len = 0, body_offset = 1;
        const TransformSpec& ts = ns.transform;
        switch (ts.kind) {
          case TransformKind::ExpSmooth:
            (void)data.col(ts.column);
            len = 2 + static_cast<int>(ts.design.size());
            break;
          case TransformKind::KernelSmooth: {
            require(!ts.coords.empty(), "kernel_smooth needs coordinate columns", ErrorCode::Config);
            require(ts.n_neighbors >= 1, "kernel_smooth needs at least one neighbor", ErrorCode::Config);
            e.ref_points = columns_of(data, ts.coords);
            e.ref_values = data.col(ts.value_column);
            require(e.ref_values.allFinite(), "column '" + ts.value_column + "' contains non-finite values", ErrorCode::Data);
            len = 1 + static_cast<int>(ts.coords.size());
            break;
          }
          case TransformKind::LinearIndex: {
            require(!ts.columns.empty(), "linear_index needs at least one column", ErrorCode::Config);
            const Eigen::MatrixXd X = columns_of(data, ts.columns);
            e.col_means = X.colwise().mean().transpose();
            const Eigen::MatrixXd Xc = X.rowwise() - e.col_means.transpose();
            e.sigma_hat = Xc.transpose() * Xc / static_cast<double>(n);
            len = static_cast<int>(ts.columns.size());
            body_offset = 0;
            break;
          }
        }
        Segment si{SegKind::Inner, 0, len, j, eidx, -1, lin, e.name + ":inner"};
        e.inner_seg = add_segment(si);
        const int body = len - body_offset;
        if (ns.inner.difference_order > 0) {
          PenaltyMatrix D = difference_penalty(ns.inner.difference_order, body);
          Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(len, len);
          S2.bottomRightCorner(body, body) = D.matrix;
          M.penalties.push_back({M.segments[e.inner_seg].start, len, S2, len - body + D.null_dim, e.name + ":inner"});
        }
        if (ns.inner.ridge) {
          Eigen::MatrixXd S2 = Eigen::MatrixXd::Zero(len, len);
          S2.bottomRightCorner(body, body).setIdentity();
          M.penalties.push_back({M.segments[e.inner_seg].start, len, S2, len - body, e.name + ":ridge"});
        }
        M.nested.push_back(e);
      }
    }
  }
  M.p = pos;
  M.train = make_design(M, data, true);

  // initial transform parameters
  for (size_t u = 0; u < M.nested.size(); ++u) {
    NestedEffect& e = M.nested[u];
    const TransformSpec& ts = e.tspec;
    const int len = M.segments[e.inner_seg].len;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(len);
    if (ts.kind == TransformKind::LinearIndex) {
      const Eigen::MatrixXd& Xc = M.train.inputs[u].Xc;
      if (ts.init) {
        require(static_cast<int>(ts.init->size()) == len, "linear_index init has the wrong length", ErrorCode::Config);
        for (int k = 0; k < len; ++k) a(k) = (*ts.init)[k];
      } else {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xc, Eigen::ComputeThinV);
        a = svd.matrixV().col(0);
        Eigen::Index imax;
        a.cwiseAbs().maxCoeff(&imax);
        if (a(imax) < 0) a = -a;
      }
      const double v = a.dot(e.sigma_hat * a);
      require(v > 0, "linear_index columns have zero variance", ErrorCode::Data);
      a *= std::sqrt(spec.c / v);
    } else {
      if (ts.kind == TransformKind::ExpSmooth) {
        const double w = ts.omega_init ? *ts.omega_init : 0.5;
        require(w > 0 && w < 1, "omega_init must lie in (0, 1)", ErrorCode::Config);
        a(1) = std::log(w / (1 - w));
      } else {
        const auto& ks = M.train.inputs[u].ks;
        const int d = ks.dim();
        if (ts.log_precision_init) {
          require(static_cast<int>(ts.log_precision_init->size()) == d, "log_precision_init has the wrong length",
                  ErrorCode::Config);
          for (int k = 0; k < d; ++k) a(1 + k) = (*ts.log_precision_init)[k];
        } else {
          for (int k = 0; k < d; ++k) {
            std::vector<double> dist;
            for (int i = 0; i < ks.points.rows(); ++i)
              for (int r : ks.neighbor_sets[i]) dist.push_back(std::abs(ks.points(i, k) - ks.ref_points(r, k)));
            std::nth_element(dist.begin(), dist.begin() + dist.size() / 2, dist.end());
            const double med = dist[dist.size() / 2];
            a(1 + k) = med > 0 ? -2.0 * std::log(med) : 0.0;
          }
        }
      }
      const TransformState st = M.eval_transform(static_cast<int>(u), a, 0);
      const double v = sample_var(st.s_tilde);
      if (v > 0) a(0) = 0.5 * std::log(spec.c / v);
    }
    e.a_init = a;
  }
  return M;
}

}  // namespace nestgam
