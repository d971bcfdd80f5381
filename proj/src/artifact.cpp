#include "nestgam/artifact.hpp"

#include <json.hpp>

#include "nestgam/config.hpp"
#include "nestgam/error.hpp"

namespace nestgam {

using nlohmann::json;

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd json_mat(const json& j) {
  const int r = static_cast<int>(j.size());
  const int c = r ? static_cast<int>(j[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i) m.row(i) = json_vec(j[i]).transpose();
  return m;
}

}  // namespace

FitArtifact make_artifact(const Model& model, const FitState& state, const DataTable& train,
                          const std::string& config_hash, std::uint64_t seed, const std::string& message) {
  FitArtifact a;
  a.config_hash = config_hash;
  a.seed = seed;
  a.spec = model.spec;
  a.train = train;
  a.state = state;
  for (const auto& e : model.nested) a.frozen.push_back(e.frozen);
  a.message = message;
  return a;
}

std::string artifact_to_text(const FitArtifact& a) {
  json j;
  j["format_version"] = a.format_version;
  j["config_hash"] = a.config_hash;
  j["seed"] = a.seed;
  j["spec"] = model_spec_to_json(a.spec);
  json td;
  td["names"] = a.train.names();
  td["columns"] = json::array();
  for (int c = 0; c < a.train.cols(); ++c) td["columns"].push_back(vec_json(a.train.col(c)));
  td["rows"] = a.train.rows();
  j["train"] = td;
  const FitState& s = a.state;
  j["zeta"] = vec_json(s.zeta);
  j["rho"] = vec_json(s.rho);
  j["V"] = mat_json(s.V);
  j["edf"] = json::array();
  for (const auto& t : s.edf) j["edf"].push_back({{"term", t.label}, {"size", t.size}, {"edf", t.edf}});
  j["edf_total"] = s.edf_total;
  j["loglik"] = s.loglik;
  j["aic"] = s.aic;
  j["laml"] = s.laml;
  j["converged"] = s.converged;
  j["trace"] = json::array();
  for (const auto& t : s.trace)
    j["trace"].push_back({{"iteration", t.iteration}, {"laml", t.laml}, {"grad_norm", t.grad_norm}, {"rho", vec_json(t.rho)}});
  j["frozen"] = json::array();
  for (const auto& f : a.frozen) {
    if (f)
      j["frozen"].push_back({{"mean", f->mean}, {"grad_mean", vec_json(f->grad_mean)}});
    else
      j["frozen"].push_back(nullptr);
  }
  j["message"] = a.message;
  return j.dump(1) + "\n";
}

FitArtifact artifact_from_text(const std::string& text) {
  const json j = parse_json_text(text, "artifact");
  FitArtifact a;
  try {
    a.format_version = j.at("format_version").get<int>();
    if (a.format_version != kFormatVersion)
      fail(ErrorCode::Config, "unsupported artifact format version " + std::to_string(a.format_version));
    a.config_hash = j.at("config_hash").get<std::string>();
    a.seed = j.at("seed").get<std::uint64_t>();
    a.spec = parse_model_config(j.at("spec"));
    const json& td = j.at("train");
    const auto names = td.at("names").get<std::vector<std::string>>();
    for (size_t c = 0; c < names.size(); ++c) a.train.add(names[c], json_vec(td.at("columns")[c]));
    a.train.set_rows(td.at("rows").get<int>());
    FitState& s = a.state;
    s.zeta = json_vec(j.at("zeta"));
    s.rho = json_vec(j.at("rho"));
    s.V = json_mat(j.at("V"));
    for (const auto& t : j.at("edf")) s.edf.push_back({t.at("term"), t.at("size"), t.at("edf")});
    s.edf_total = j.at("edf_total");
    s.loglik = j.at("loglik");
    s.aic = j.at("aic");
    s.laml = j.at("laml");
    s.converged = j.at("converged");
    for (const auto& t : j.at("trace"))
      s.trace.push_back({t.at("iteration"), t.at("laml"), t.at("grad_norm"), json_vec(t.at("rho"))});
    for (const auto& f : j.at("frozen")) {
      if (f.is_null())
        a.frozen.push_back(std::nullopt);
      else
        a.frozen.push_back(FrozenCentre{f.at("mean").get<double>(), json_vec(f.at("grad_mean"))});
    }
    a.message = j.value("message", "");
  } catch (const json::exception& e) {
    fail(ErrorCode::Config, std::string("artifact is malformed: ") + e.what());
  }
  return a;
}

void save_artifact(const std::string& path, const FitArtifact& a) { write_text(path, artifact_to_text(a)); }

FitArtifact load_artifact(const std::string& path) { return artifact_from_text(read_text(path)); }

Model rebuild_model(const FitArtifact& a) {
  Model m = build(a.spec, a.train);
  require(m.p == a.state.zeta.size(), "artifact coefficients do not match the rebuilt model", ErrorCode::Config);
  require(m.nested.size() == a.frozen.size(), "artifact centring statistics do not match the rebuilt model",
          ErrorCode::Config);
  for (size_t u = 0; u < m.nested.size(); ++u) m.nested[u].frozen = a.frozen[u];
  return m;
}

}  // namespace nestgam
