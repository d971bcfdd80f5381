#include "nestgam/nestgam.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <json.hpp>
#include <sstream>

#include "nestgam/artifact.hpp"
#include "nestgam/checks.hpp"
#include "nestgam/config.hpp"
#include "nestgam/error.hpp"
#include "nestgam/inference.hpp"
#include "nestgam/optimize.hpp"
#include "nestgam/oracle.hpp"

using namespace nestgam;

struct ng_fit {
  FitArtifact artifact;
  Model model;
  FitResult result;  // outer-loop details; empty after load
};

namespace {

thread_local std::string g_last_error;

ng_status to_status(ErrorCode c) { return static_cast<ng_status>(static_cast<int>(c)); }

template <class F>
ng_status guarded(F&& f) {
  g_last_error.clear();
  try {
    return f();
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NG_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NG_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void need(const void* p, const char* what) {
  require(p != nullptr, std::string(what) + " must not be null");
}

std::vector<std::string> meta(const ng_fit* f) { return {provenance_line(f->artifact.config_hash, f->artifact.seed)}; }

/// Inner parameters in reporting form. The single-index direction is flipped so its
/// largest-magnitude entry is positive; the sign never enters the objective.
std::string inner_report(const Model& m, const Eigen::VectorXd& zeta, int u) {
  const NestedEffect& e = m.nested[u];
  const Segment& si = m.segments[e.inner_seg];
  Eigen::VectorXd a = zeta.segment(si.start, si.len);
  std::ostringstream os;
  switch (e.kind()) {
    case TransformKind::LinearIndex: {
      Eigen::Index k = 0;
      a.cwiseAbs().maxCoeff(&k);
      if (a(k) < 0) a = -a;
      os << "direction";
      for (size_t j = 0; j < e.tspec.columns.size(); ++j) os << " " << e.tspec.columns[j] << "=" << format_double(a(j));
      os << " |a|=" << format_double(a.norm());
      break;
    }
    case TransformKind::ExpSmooth: {
      os << "a0=" << format_double(a(0));
      os << " weight_coef";
      for (int j = 1; j < a.size(); ++j) os << " " << format_double(a(j));
      if (e.tspec.design.empty()) os << " omega=" << format_double(logistic(a(1)).v);
      break;
    }
    case TransformKind::KernelSmooth: {
      os << "a0=" << format_double(a(0)) << " bandwidth";
      for (int j = 1; j < a.size(); ++j) os << " " << e.tspec.coords[j - 1] << "=" << format_double(std::exp(-0.5 * a(j)));
      break;
    }
  }
  return os.str();
}

std::string summary_text(const ng_fit* f) {
  const Model& m = f->model;
  const FitState& s = f->artifact.state;
  std::ostringstream os;
  os << provenance_line(f->artifact.config_hash, f->artifact.seed) << "\n";
  os << "rows " << m.n() << "  coefficients " << m.p << "  penalties " << m.n_penalties() << "\n";
  os << "converged " << (s.converged ? "yes" : "no") << "  outer iterations " << (s.trace.empty() ? 0 : s.trace.back().iteration) << "\n";
  os << "loglik " << format_double(s.loglik) << "\n";
  os << "laml " << format_double(s.laml) << "\n";
  os << "edf " << format_double(s.edf_total) << "\n";
  os << "aic " << format_double(s.aic) << "\n";
  os << "\nterm,coefficients,edf\n";
  for (const auto& t : s.edf) os << t.label << "," << t.size << "," << format_double(t.edf) << "\n";
  os << "\npenalty,log_lambda\n";
  for (int g = 0; g < m.n_penalties(); ++g) os << m.penalties[g].label << "," << format_double(s.rho(g)) << "\n";
  if (!m.nested.empty()) {
    os << "\ninner estimates\n";
    for (size_t u = 0; u < m.nested.size(); ++u)
      os << m.nested[u].name << " (" << to_string(m.nested[u].kind()) << "): " << inner_report(m, s.zeta, static_cast<int>(u))
         << "\n";
  }
  if (!f->artifact.message.empty()) os << "\n" << f->artifact.message << "\n";
  return os.str();
}

DataTable band_table(const EffectBand& b) {
  DataTable t;
  t.add("grid", b.grid);
  t.add("estimate", b.estimate);
  t.add("se", b.se);
  t.add("lower", b.lower);
  t.add("upper", b.upper);
  t.set_rows(static_cast<int>(b.grid.size()));
  return t;
}

std::string file_safe(std::string s) {
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

}  // namespace

extern "C" {

const char* ng_last_error(void) { return g_last_error.c_str(); }

int ng_format_version(void) { return kFormatVersion; }

void ng_string_free(char* s) { std::free(s); }

ng_status ng_fit_run(const char* config_path, const char* data_path, uint64_t seed, ng_fit** out) {
  return guarded([&] {
    need(config_path, "config path");
    need(data_path, "data path");
    need(out, "output handle");
    *out = nullptr;
    const std::string cfg_text = read_text(config_path);
    const ModelSpec spec = parse_model_config(parse_json_text(cfg_text, "config"));
    const DataTable data = read_csv(data_path);
    auto f = std::make_unique<ng_fit>();
    f->model = build(spec, data);
    f->result = fit(f->model);
    const FitState st = make_fit_state(f->model, f->result);
    f->artifact = make_artifact(f->model, st, data, fnv1a_hex(cfg_text), seed, f->result.message);
    const bool ok = f->result.converged;
    if (!ok) g_last_error = "fit did not converge: " + f->result.message;
    *out = f.release();
    return ok ? NG_OK : NG_ERR_NOT_CONVERGED;
  });
}

ng_status ng_fit_save(const ng_fit* fit, const char* path) {
  return guarded([&] {
    need(fit, "fit");
    need(path, "path");
    save_artifact(path, fit->artifact);
    return NG_OK;
  });
}

ng_status ng_fit_load(const char* path, ng_fit** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "output handle");
    *out = nullptr;
    auto f = std::make_unique<ng_fit>();
    f->artifact = load_artifact(path);
    f->model = rebuild_model(f->artifact);
    *out = f.release();
    return NG_OK;
  });
}

void ng_fit_free(ng_fit* fit) { delete fit; }

ng_status ng_fit_get_info(const ng_fit* fit, ng_fit_info* info) {
  return guarded([&] {
    need(fit, "fit");
    need(info, "info");
    const FitState& s = fit->artifact.state;
    info->n_coef = fit->model.p;
    info->n_penalties = fit->model.n_penalties();
    info->n_rows = fit->model.n();
    info->converged = s.converged ? 1 : 0;
    info->outer_iterations = s.trace.empty() ? 0 : s.trace.back().iteration;
    info->laml = s.laml;
    info->loglik = s.loglik;
    info->edf = s.edf_total;
    info->aic = s.aic;
    return NG_OK;
  });
}

ng_status ng_fit_get_rho(const ng_fit* fit, double* rho, int cap, int* len) {
  return guarded([&] {
    need(fit, "fit");
    const Eigen::VectorXd& r = fit->artifact.state.rho;
    if (len) *len = static_cast<int>(r.size());
    for (int i = 0; rho && i < std::min<int>(cap, static_cast<int>(r.size())); ++i) rho[i] = r(i);
    return NG_OK;
  });
}

ng_status ng_fit_get_coef(const ng_fit* fit, double* coef, int cap, int* len) {
  return guarded([&] {
    need(fit, "fit");
    const Eigen::VectorXd& z = fit->artifact.state.zeta;
    if (len) *len = static_cast<int>(z.size());
    for (int i = 0; coef && i < std::min<int>(cap, static_cast<int>(z.size())); ++i) coef[i] = z(i);
    return NG_OK;
  });
}

ng_status ng_fit_summary(const ng_fit* fit, char** text) {
  return guarded([&] {
    need(fit, "fit");
    need(text, "text");
    *text = dup_string(summary_text(fit));
    return NG_OK;
  });
}

ng_status ng_fit_trace_csv(const ng_fit* fit, char** text) {
  return guarded([&] {
    need(fit, "fit");
    need(text, "text");
    std::ostringstream os;
    os << "# " << provenance_line(fit->artifact.config_hash, fit->artifact.seed) << "\n";
    os << "iteration,laml,grad_norm";
    for (int g = 0; g < fit->model.n_penalties(); ++g) os << ",rho" << g + 1;
    os << "\n";
    for (const auto& t : fit->artifact.state.trace) {
      os << t.iteration << "," << format_double(t.laml) << "," << format_double(t.grad_norm);
      for (int g = 0; g < t.rho.size(); ++g) os << "," << format_double(t.rho(g));
      os << "\n";
    }
    *text = dup_string(os.str());
    return NG_OK;
  });
}

ng_status ng_fit_write_effects(const ng_fit* fit, const char* dir, int grid_points) {
  return guarded([&] {
    need(fit, "fit");
    need(dir, "directory");
    const Model& m = fit->model;
    const FitState& s = fit->artifact.state;
    const int np = grid_points > 0 ? grid_points : m.spec.fit.grid_points;
    require(np >= 2, "effect grids need at least two points");
    const double level = m.spec.fit.level;
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    for (size_t u = 0; u < m.nested.size(); ++u) {
      const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(np, m.knot_range.lo, m.knot_range.hi);
      const EffectBand b = nested_effect_grid(m, s, static_cast<int>(u), grid, level);
      write_csv((base / ("effect_" + file_safe(m.nested[u].name) + ".csv")).string(), band_table(b), meta(fit));
    }
    for (size_t t = 0; t < m.gamma.size(); ++t) {
      const GammaTerm& g = m.gamma[t];
      if (g.type != TermType::Smooth) continue;
      const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(np, g.basis.lo(), g.basis.hi());
      const EffectBand b = smooth_effect_grid(m, s, static_cast<int>(t), grid, level);
      write_csv((base / ("effect_" + file_safe(g.label) + ".csv")).string(), band_table(b), meta(fit));
    }
    return NG_OK;
  });
}

ng_status ng_predict_csv(const ng_fit* fit, const char* data_path, const char* out_path, ng_scores* scores) {
  return guarded([&] {
    need(fit, "fit");
    need(data_path, "data path");
    need(out_path, "output path");
    const DataTable data = read_csv(data_path);
    const Prediction pr = predict_and_score(fit->model, fit->artifact.state.zeta, data);
    DataTable out;
    const Model& m = fit->model;
    for (size_t j = 0; j < pr.eta.size(); ++j) out.add("eta_" + m.spec.predictors[j].name, pr.eta[j].matrix());
    out.add("mean", pr.mean.matrix());
    if (pr.theta.size() >= 2) out.add("sd", pr.theta[1].sqrt().matrix());
    if (pr.scored) {
      out.add("log_score", pr.log_score_i.matrix());
      out.add("crps", pr.crps_i.matrix());
    }
    out.set_rows(data.rows());
    write_csv(out_path, out, meta(fit));
    if (scores) {
      scores->n = data.rows();
      scores->scored = pr.scored ? 1 : 0;
      scores->log_score = pr.log_score;
      scores->mean_log_score = pr.mean_log_score;
      scores->crps = pr.crps;
      scores->rmse = pr.rmse;
      scores->mae = pr.mae;
    }
    return NG_OK;
  });
}

ng_status ng_simulate_csv(const char* scenario_path, uint64_t seed, const char* out_path, const char* truth_path) {
  return guarded([&] {
    need(scenario_path, "scenario path");
    need(out_path, "output path");
    const std::string text = read_text(scenario_path);
    SimScenario sc = parse_scenario_config(parse_json_text(text, "scenario"));
    sc.seed = seed;
    const SimResult r = simulate(sc);
    const std::string hash = fnv1a_hex(text);
    write_csv(out_path, r.data, {provenance_line(hash, seed)});
    if (truth_path) {
      nlohmann::json j;
      j["format_version"] = kFormatVersion;
      j["config_hash"] = hash;
      j["seed"] = seed;
      j["scenario"] = scenario_to_json(sc);
      j["truth"] = r.truth;
      write_text(truth_path, j.dump(1) + "\n");
    }
    return NG_OK;
  });
}

ng_status ng_check_run(const char* profile, const char* corrupt_rule, uint64_t seed, char** report, int* all_pass) {
  return guarded([&] {
    CheckOptions o;
    if (profile) o.profile = profile;
    if (corrupt_rule) o.corrupt_rule = corrupt_rule;
    o.seed = seed;
    const CheckReport r = run_checks(o);
    if (report) *report = dup_string(format_check_report(r));
    if (all_pass) *all_pass = r.all_pass ? 1 : 0;
    return NG_OK;
  });
}

}  // extern "C"
