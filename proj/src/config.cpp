#include "nestgam/config.hpp"

#include <set>

#include "nestgam/error.hpp"

namespace nestgam {

using nlohmann::json;

namespace {

/// Walks one JSON object, tracking which keys were consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(ErrorCode::Config, path_ + ": expected an object");
  }
  ~Obj() = default;

  bool has(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k);
  }
  std::string at(const std::string& k) const { return path_ + "." + k; }

  double num(const std::string& k, double def) {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number()) fail(ErrorCode::Config, at(k) + ": expected a number");
    return v.get<double>();
  }
  int integer(const std::string& k, int def) {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_number_integer()) fail(ErrorCode::Config, at(k) + ": expected an integer");
    return v.get<int>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = j_.at(k);
    if (!v.is_boolean()) fail(ErrorCode::Config, at(k) + ": expected true or false");
    return v.get<bool>();
  }
  std::string str(const std::string& k, const std::string& def, bool required = false) {
    if (!has(k)) {
      if (required) fail(ErrorCode::Config, at(k) + ": required key is missing");
      return def;
    }
    const json& v = j_.at(k);
    if (!v.is_string()) fail(ErrorCode::Config, at(k) + ": expected a string");
    return v.get<std::string>();
  }
  std::vector<std::string> strs(const std::string& k, bool required = false) {
    std::vector<std::string> out;
    if (!has(k)) {
      if (required) fail(ErrorCode::Config, at(k) + ": required key is missing");
      return out;
    }
    const json& v = j_.at(k);
    if (!v.is_array()) fail(ErrorCode::Config, at(k) + ": expected an array of strings");
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) fail(ErrorCode::Config, at(k) + "[" + std::to_string(i) + "]: expected a string");
      out.push_back(v[i].get<std::string>());
    }
    return out;
  }
  std::optional<std::vector<double>> nums(const std::string& k) {
    if (!has(k)) return std::nullopt;
    const json& v = j_.at(k);
    if (!v.is_array()) fail(ErrorCode::Config, at(k) + ": expected an array of numbers");
    std::vector<double> out;
    for (size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(ErrorCode::Config, at(k) + "[" + std::to_string(i) + "]: expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }
  std::optional<double> opt_num(const std::string& k) {
    if (!has(k)) return std::nullopt;
    return num(k, 0.0);
  }
  const json& sub(const std::string& k) {
    seen_.insert(k);
    return j_.at(k);
  }
  /// Rejects keys that were never looked up.
  void close() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(ErrorCode::Config, path_ + ": unknown key '" + it.key() + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TransformSpec parse_transform(const json& j, const std::string& path) {
  Obj o(j, path);
  TransformSpec t;
  try {
    t.kind = transform_kind_from_string(o.str("kind", "", true));
  } catch (const Error& e) {
    fail(ErrorCode::Config, o.at("kind") + ": " + e.what());
  }
  switch (t.kind) {
    case TransformKind::ExpSmooth:
      t.column = o.str("column", "", true);
      t.design = o.strs("design");
      t.z0 = o.opt_num("z0");
      t.omega_init = o.opt_num("omega_init");
      break;
    case TransformKind::KernelSmooth:
      t.coords = o.strs("coords", true);
      t.value_column = o.str("value_column", "", true);
      t.n_neighbors = o.integer("n_neighbors", t.n_neighbors);
      t.log_precision_init = o.nums("log_precision_init");
      break;
    case TransformKind::LinearIndex:
      t.columns = o.strs("columns", true);
      t.init = o.nums("init");
      break;
  }
  o.close();
  return t;
}

TermSpec parse_term(const json& j, const std::string& path) {
  Obj o(j, path);
  TermSpec t;
  const std::string type = o.str("type", "", true);
  if (type == "parametric") {
    t.type = TermType::Parametric;
    t.columns = o.strs("columns", true);
    if (t.columns.empty()) fail(ErrorCode::Config, o.at("columns") + ": at least one column is required");
    t.ridge = o.boolean("ridge", false);
  } else if (type == "smooth") {
    t.type = TermType::Smooth;
    t.smooth.column = o.str("column", "", true);
    t.smooth.k = o.integer("k", t.smooth.k);
    t.smooth.degree = o.integer("degree", t.smooth.degree);
    t.smooth.penalty_order = o.integer("penalty_order", t.smooth.penalty_order);
    if (o.has("center")) t.smooth.center = o.boolean("center", true);
  } else if (type == "nested") {
    t.type = TermType::Nested;
    NestedSpec& n = t.nested;
    n.name = o.str("name", "", true);
    n.k = o.integer("k", n.k);
    n.degree = o.integer("degree", n.degree);
    n.penalty_order = o.integer("penalty_order", n.penalty_order);
    if (!o.has("transform")) fail(ErrorCode::Config, o.at("transform") + ": required key is missing");
    n.transform = parse_transform(o.sub("transform"), o.at("transform"));
    if (o.has("inner_penalty")) {
      Obj ip(o.sub("inner_penalty"), o.at("inner_penalty"));
      n.inner.difference_order = ip.integer("difference_order", 0);
      n.inner.ridge = ip.boolean("ridge", false);
      ip.close();
    }
  } else {
    fail(ErrorCode::Config, o.at("type") + ": expected one of parametric, smooth, nested");
  }
  o.close();
  return t;
}

json transform_to_json(const TransformSpec& t) {
  json j;
  j["kind"] = to_string(t.kind);
  switch (t.kind) {
    case TransformKind::ExpSmooth:
      j["column"] = t.column;
      j["design"] = t.design;
      if (t.z0) j["z0"] = *t.z0;
      if (t.omega_init) j["omega_init"] = *t.omega_init;
      break;
    case TransformKind::KernelSmooth:
      j["coords"] = t.coords;
      j["value_column"] = t.value_column;
      j["n_neighbors"] = t.n_neighbors;
      if (t.log_precision_init) j["log_precision_init"] = *t.log_precision_init;
      break;
    case TransformKind::LinearIndex:
      j["columns"] = t.columns;
      if (t.init) j["init"] = *t.init;
      break;
  }
  return j;
}

}  // namespace

json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Config, what + ": invalid JSON: " + e.what());
  }
}

ModelSpec parse_model_config(const json& j) {
  Obj o(j, "$");
  ModelSpec s;
  s.family = o.str("family", s.family);
  s.response = o.str("response", s.response);
  s.pi_bound = o.num("pi_bound", s.pi_bound);
  s.c = o.num("c", s.c);
  if (!(s.pi_bound > 0 && s.pi_bound <= 1)) fail(ErrorCode::Config, "$.pi_bound: must lie in (0, 1]");
  if (!(s.c > 0)) fail(ErrorCode::Config, "$.c: must be positive");
  if (!o.has("predictors")) fail(ErrorCode::Config, "$.predictors: required key is missing");
  const json& preds = o.sub("predictors");
  if (!preds.is_array()) fail(ErrorCode::Config, "$.predictors: expected an array");
  for (size_t i = 0; i < preds.size(); ++i) {
    const std::string path = "$.predictors[" + std::to_string(i) + "]";
    Obj po(preds[i], path);
    PredictorSpec p;
    p.name = po.str("name", "eta" + std::to_string(i + 1));
    try {
      p.link = link_from_string(po.str("link", i == 0 ? "identity" : "log"));
    } catch (const Error& e) {
      fail(ErrorCode::Config, po.at("link") + ": " + e.what());
    }
    p.intercept = po.boolean("intercept", true);
    p.offset = po.num("offset", 0.0);
    if (po.has("terms")) {
      const json& terms = po.sub("terms");
      if (!terms.is_array()) fail(ErrorCode::Config, po.at("terms") + ": expected an array");
      for (size_t k = 0; k < terms.size(); ++k)
        p.terms.push_back(parse_term(terms[k], po.at("terms") + "[" + std::to_string(k) + "]"));
    }
    po.close();
    s.predictors.push_back(p);
  }
  if (o.has("fit")) {
    Obj fo(o.sub("fit"), "$.fit");
    FitOptions& f = s.fit;
    f.max_newton = fo.integer("max_newton", f.max_newton);
    f.newton_tol = fo.num("newton_tol", f.newton_tol);
    f.max_outer = fo.integer("max_outer", f.max_outer);
    f.outer_grad_tol = fo.num("outer_grad_tol", f.outer_grad_tol);
    f.outer_rel_tol = fo.num("outer_rel_tol", f.outer_rel_tol);
    f.rho_init = fo.nums("rho_init");
    f.fixed_rho = fo.boolean("fixed_rho", f.fixed_rho);
    f.level = fo.num("level", f.level);
    f.grid_points = fo.integer("grid_points", f.grid_points);
    if (!(f.level > 0 && f.level < 1)) fail(ErrorCode::Config, "$.fit.level: must lie in (0, 1)");
    if (f.grid_points < 2) fail(ErrorCode::Config, "$.fit.grid_points: must be at least 2");
    fo.close();
  }
  o.close();
  return s;
}

ModelSpec load_model_config(const std::string& path) {
  return parse_model_config(parse_json_text(read_text(path), path));
}

json model_spec_to_json(const ModelSpec& s) {
  json j;
  j["family"] = s.family;
  j["response"] = s.response;
  j["pi_bound"] = s.pi_bound;
  j["c"] = s.c;
  j["predictors"] = json::array();
  for (const auto& p : s.predictors) {
    json pj;
    pj["name"] = p.name;
    pj["link"] = to_string(p.link);
    pj["intercept"] = p.intercept;
    pj["offset"] = p.offset;
    pj["terms"] = json::array();
    for (const auto& t : p.terms) {
      json tj;
      switch (t.type) {
        case TermType::Parametric:
          tj["type"] = "parametric";
          tj["columns"] = t.columns;
          tj["ridge"] = t.ridge;
          break;
        case TermType::Smooth:
          tj["type"] = "smooth";
          tj["column"] = t.smooth.column;
          tj["k"] = t.smooth.k;
          tj["degree"] = t.smooth.degree;
          tj["penalty_order"] = t.smooth.penalty_order;
          if (t.smooth.center) tj["center"] = *t.smooth.center;
          break;
        case TermType::Nested:
          tj["type"] = "nested";
          tj["name"] = t.nested.name;
          tj["k"] = t.nested.k;
          tj["degree"] = t.nested.degree;
          tj["penalty_order"] = t.nested.penalty_order;
          tj["transform"] = transform_to_json(t.nested.transform);
          tj["inner_penalty"] = {{"difference_order", t.nested.inner.difference_order},
                                 {"ridge", t.nested.inner.ridge}};
          break;
      }
      pj["terms"].push_back(tj);
    }
    j["predictors"].push_back(pj);
  }
  const FitOptions& f = s.fit;
  json fj = {{"max_newton", f.max_newton},         {"newton_tol", f.newton_tol},
             {"max_outer", f.max_outer},           {"outer_grad_tol", f.outer_grad_tol},
             {"outer_rel_tol", f.outer_rel_tol},   {"fixed_rho", f.fixed_rho},
             {"level", f.level},                   {"grid_points", f.grid_points}};
  if (f.rho_init) fj["rho_init"] = *f.rho_init;
  j["fit"] = fj;
  return j;
}

SimScenario parse_scenario_config(const json& j) {
  Obj o(j, "$");
  SimScenario sc;
  sc.kind = o.str("kind", "", true);
  sc.n = o.integer("n", sc.n);
  sc.noise = o.num("noise", sc.noise);
  sc.dims = o.integer("dims", sc.dims);
  sc.omega = o.num("omega", sc.omega);
  sc.omega2 = o.num("omega2", sc.omega2);
  sc.bandwidth = o.num("bandwidth", sc.bandwidth);
  o.close();
  bool known = false;
  for (const auto& k : scenario_kinds()) known = known || k == sc.kind;
  if (!known) fail(ErrorCode::Config, "$.kind: unknown scenario '" + sc.kind + "'");
  if (sc.n < 0) fail(ErrorCode::Config, "$.n: must be non-negative");
  return sc;
}

json scenario_to_json(const SimScenario& sc) {
  return {{"kind", sc.kind},   {"n", sc.n},         {"noise", sc.noise},        {"dims", sc.dims},
          {"omega", sc.omega}, {"omega2", sc.omega2}, {"bandwidth", sc.bandwidth}};
}

}  // namespace nestgam
