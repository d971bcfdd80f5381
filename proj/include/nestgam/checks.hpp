#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nestgam/model.hpp"

namespace nestgam {

struct CheckResult {
  std::string name;
  std::vector<std::string> entries;  // manifest entries this check verifies
  double error = 0.0;
  double tol = 0.0;
  bool pass = false;
  std::string detail;
};

struct CheckOptions {
  std::string profile = "default";  // default | tight
  std::string corrupt_rule;         // mutation hook for the rho-derivative blocks
  std::uint64_t seed = 1;
};

struct CheckReport {
  std::vector<CheckResult> results;
  std::map<std::string, long> coverage;
  std::vector<std::string> uncovered;
  bool all_pass = true;
};

/// Every analytic derivative that must be verified by at least one oracle check.
std::vector<std::string> derivative_manifest();

CheckReport run_checks(const CheckOptions& opt);
std::string format_check_report(const CheckReport& r);

// Fixtures shared by the check suite, unit tests and acceptance runs.
DataTable fixture_data(std::uint64_t seed, int n);
/// Names: es_si, ks_si, es_design, reference, all_kinds, additive.
ModelSpec fixture_spec(const std::string& name);
Model fixture_model(const std::string& name, std::uint64_t seed, int n);
/// Random coefficient vector near the initial point with non-trivial outer coefficients.
Eigen::VectorXd fixture_zeta(const Model& model, std::uint64_t seed);
/// Mode at fixed rho: outer coefficients first with inner parameters frozen, then jointly.
Eigen::VectorXd fit_mode(const Model& model, const Eigen::VectorXd& rho, double tol = 1e-10);

// Individual checks.
CheckResult check_basis_fd(double tol);
CheckResult check_outer_constraints(double tol);
CheckResult check_transform_fd(TransformKind kind, double tol, std::uint64_t seed);
CheckResult check_scaling_fd(double tol, std::uint64_t seed);
CheckResult check_scaling_dual_path(double tol, std::uint64_t seed);
CheckResult check_family_fd(double tol, std::uint64_t seed);
CheckResult check_chain_eta_fd(double tol, std::uint64_t seed);
CheckResult check_chain_stilde_fd(double tol, std::uint64_t seed);
CheckResult check_gradient_fd(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, double tol);
CheckResult check_hessian_fd(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, double tol);
CheckResult check_hessian_dense(const Model& model, const Eigen::VectorXd& zeta, double tol);
/// Compares the block-routed rho-derivative against the dense reference one direction
/// segment at a time; returns one result per rule that fired.
std::vector<CheckResult> check_gamma_dense(const Model& model, const Eigen::VectorXd& zeta, double tol,
                                           std::map<std::string, long>* coverage, const std::string& corrupt_rule,
                                           std::uint64_t seed, const std::string& fixture);
CheckResult check_gamma_refit(const Model& model, const Eigen::VectorXd& rho, double tol,
                              const std::string& corrupt_rule = "");
CheckResult check_dzeta_refit(const Model& model, const Eigen::VectorXd& rho, double tol);
CheckResult check_laml_gradient_fd(const Model& model, const Eigen::VectorXd& rho, double tol);
CheckResult check_laml_exact(double tol, std::uint64_t seed, int draws, int n);
CheckResult check_stein_edf(double tol, std::uint64_t seed);
CheckResult check_crps_quadrature(double tol);
CheckResult check_knot_bound(std::uint64_t seed, int samples);

}  // namespace nestgam
