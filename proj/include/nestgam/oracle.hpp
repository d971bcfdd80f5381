#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "nestgam/io.hpp"
#include "nestgam/model.hpp"

namespace nestgam {

struct FdConfig {
  double rel_step = 1e-5;
  double abs_step = 1e-6;
  bool richardson = false;
};

struct FdResult {
  Eigen::MatrixXd jacobian;  // rows: outputs, cols: inputs
  Eigen::VectorXd steps;
};

using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ScalarFn = std::function<double(const Eigen::VectorXd&)>;

/// Central differences, optionally with one Richardson extrapolation level.
FdResult fd_jacobian(const VecFn& f, const Eigen::VectorXd& x, const FdConfig& cfg = {});
Eigen::VectorXd fd_gradient(const ScalarFn& f, const Eigen::VectorXd& x, const FdConfig& cfg = {});

/// |a - b| / max(1, |a|, |b|)
double rel_err(double a, double b);
/// Maximum entrywise relative error.
double max_rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Hessian of the log-likelihood built from per-observation dense derivatives of each
/// linear predictor (no block patterns), for p up to kDenseLimit.
Eigen::MatrixXd dense_loglik_hessian(const Model& model, const Eigen::VectorXd& zeta);
/// Third derivative of log-likelihood minus scaling penalties contracted with v.
Eigen::MatrixXd dense_hessian_rho_reference(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& v);
constexpr int kDenseLimit = 15;

/// log of the integral of N(y | X z, sigma2 I) N(z | 0, P^-1) over z, P positive definite.
double gaussian_evidence(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double sigma2, const Eigen::MatrixXd& P);

/// Effective degrees of freedom by the Stein route for a Gaussian additive model with
/// known variance: sigma^-2 tr[(X'X / sigma2 + S)^-1 sum_i dmu_i dmu_i'].
double stein_edf_gaussian(const Eigen::MatrixXd& X, double sigma2, const Eigen::MatrixXd& S);

/// Simulation scenarios with recorded ground truth.
struct SimScenario {
  std::string kind = "single_index";  // single_index | exp_smooth | exp_smooth_two | kernel_smooth | netdemand
  std::uint64_t seed = 1;
  int n = 1000;
  double noise = 0.3;
  int dims = 8;            // single_index inner dimension
  double omega = 0.8;      // exp_smooth
  double omega2 = 0.995;   // exp_smooth_two second regime
  double bandwidth = 0.04;  // kernel_smooth, first coordinate; the second uses 1.5x
};

struct SimResult {
  DataTable data;
  std::map<std::string, std::vector<double>> truth;
};

SimResult simulate(const SimScenario& sc);
std::vector<std::string> scenario_kinds();
/// Model matching a scenario's data columns.
ModelSpec scenario_model(const SimScenario& sc);

/// True outer function used by the single-index and exp-smooth scenarios.
double sim_outer(double u);

}  // namespace nestgam
