#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "nestgam/nestgam.h"

namespace {

// Exit codes: 0 success, 1 check failures, 2 bad input, 3 no convergence, 4 other errors.
int exit_code(ng_status s) {
  switch (s) {
    case NG_OK: return 0;
    case NG_ERR_INVALID_ARGUMENT:
    case NG_ERR_CONFIG:
    case NG_ERR_DATA:
    case NG_ERR_IO: return 2;
    case NG_ERR_NOT_CONVERGED: return 3;
    default: return 4;
  }
}

int report_error(const char* what, ng_status s) {
  std::cerr << "nestgam " << what << ": " << ng_last_error() << "\n";
  return exit_code(s);
}

bool write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
  return static_cast<bool>(f);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  ng_string_free(s);
  return out;
}

struct FitArgs {
  std::string config, data, out;
  std::uint64_t seed = 1;
  int grid_points = 0;
};

int run_fit(const FitArgs& a) {
  ng_fit* fit = nullptr;
  const ng_status st = ng_fit_run(a.config.c_str(), a.data.c_str(), a.seed, &fit);
  if (!fit) return report_error("fit", st);
  const std::string err = st == NG_OK ? "" : ng_last_error();
  std::filesystem::create_directories(a.out);
  const std::filesystem::path out(a.out);
  char* text = nullptr;
  ng_status s2 = ng_fit_save(fit, (out / "fit.json").string().c_str());
  if (s2 == NG_OK) s2 = ng_fit_summary(fit, &text);
  const std::string summary = take(text);
  text = nullptr;
  if (s2 == NG_OK) s2 = ng_fit_trace_csv(fit, &text);
  const std::string trace = take(text);
  if (s2 == NG_OK) s2 = ng_fit_write_effects(fit, (out / "effects").string().c_str(), a.grid_points);
  ng_fit_free(fit);
  if (s2 != NG_OK) return report_error("fit", s2);
  if (!write_file(out / "summary.txt", summary) || !write_file(out / "trace.csv", trace)) {
    std::cerr << "nestgam fit: cannot write to " << a.out << "\n";
    return 2;
  }
  std::cout << summary;
  if (st != NG_OK) {
    std::cerr << "nestgam fit: " << err << "\n" << trace;
    return exit_code(st);
  }
  return 0;
}

struct PredictArgs {
  std::string artifact, data, out;
};

int run_predict(const PredictArgs& a) {
  ng_fit* fit = nullptr;
  ng_status s = ng_fit_load(a.artifact.c_str(), &fit);
  if (s != NG_OK) return report_error("predict", s);
  ng_scores sc{};
  s = ng_predict_csv(fit, a.data.c_str(), a.out.c_str(), &sc);
  ng_fit_free(fit);
  if (s != NG_OK) return report_error("predict", s);
  std::printf("rows %d\n", sc.n);
  if (sc.scored) {
    std::printf("log_score %.17g\nmean_log_score %.17g\ncrps %.17g\nrmse %.17g\nmae %.17g\n", sc.log_score,
                sc.mean_log_score, sc.crps, sc.rmse, sc.mae);
  } else {
    std::printf("response column absent; scores omitted\n");
  }
  return 0;
}

struct SimArgs {
  std::string config, out, truth;
  std::uint64_t seed = 1;
};

int run_simulate(const SimArgs& a) {
  const ng_status s =
      ng_simulate_csv(a.config.c_str(), a.seed, a.out.c_str(), a.truth.empty() ? nullptr : a.truth.c_str());
  return s == NG_OK ? 0 : report_error("simulate", s);
}

struct CheckArgs {
  std::string profile = "default", out, corrupt;
  std::uint64_t seed = 1;
};

int run_check(const CheckArgs& a) {
  char* text = nullptr;
  int pass = 0;
  const ng_status s =
      ng_check_run(a.profile.c_str(), a.corrupt.empty() ? nullptr : a.corrupt.c_str(), a.seed, &text, &pass);
  if (s != NG_OK) return report_error("check", s);
  const std::string report = take(text);
  std::cout << report;
  if (!a.out.empty() && !write_file(a.out, report)) {
    std::cerr << "nestgam check: cannot write " << a.out << "\n";
    return 2;
  }
  std::cout << (pass ? "all checks passed\n" : "some checks FAILED\n");
  return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested-effect distributional regression"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model and write the artifact, summary and effect grids");
  fit->add_option("--config", fa.config, "Model config (JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", fa.data, "Training CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fa.out, "Output directory")->required();
  fit->add_option("--seed", fa.seed, "Seed recorded in outputs");
  fit->add_option("--grid-points", fa.grid_points, "Points per effect grid (default from config)");

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Predict and score new data with a saved fit");
  pred->add_option("--artifact", pa.artifact, "Fit artifact (fit.json)")->required()->check(CLI::ExistingFile);
  pred->add_option("--data", pa.data, "CSV with the model's covariates")->required()->check(CLI::ExistingFile);
  pred->add_option("--out", pa.out, "Predictions CSV")->required();

  SimArgs sa;
  auto* sim = app.add_subcommand("simulate", "Simulate a scenario with known truth");
  sim->add_option("--config", sa.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out", sa.out, "Output CSV")->required();
  sim->add_option("--truth", sa.truth, "Ground-truth JSON output");
  sim->add_option("--seed", sa.seed, "Random seed");

  CheckArgs ca;
  auto* chk = app.add_subcommand("check", "Run the derivative and exactness oracle suite");
  chk->add_option("--tol-profile", ca.profile, "Tolerance profile")->check(CLI::IsMember({"default", "tight"}));
  chk->add_option("--out", ca.out, "Report CSV");
  chk->add_option("--seed", ca.seed, "Fixture seed");
  chk->add_option("--corrupt-block", ca.corrupt, "Scale one rho-derivative block (mutation testing)")->group("");

  CLI11_PARSE(app, argc, argv);
  if (*fit) return run_fit(fa);
  if (*pred) return run_predict(pa);
  if (*sim) return run_simulate(sa);
  return run_check(ca);
}
