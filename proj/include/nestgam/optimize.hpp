#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nestgam/assembly.hpp"
#include "nestgam/model.hpp"

namespace nestgam {

struct NewtonOptions {
  int max_iter = 200;
  /// Converged when the max-norm gradient is below tol * max(1, |L|).
  double tol = 1e-8;
  /// Coefficients held fixed (empty: none).
  std::vector<bool> frozen;
};

struct NewtonReport {
  Eigen::VectorXd zeta;
  int iterations = 0;
  double final_grad_norm = 0.0;
  double hessian_perturbation = 0.0;
  bool converged = false;
  double value = 0.0;
  std::string message;
};

/// Cholesky of the negative Hessian with the minimal ridge needed to make it succeed.
struct NegHessianFactor {
  Eigen::LLT<Eigen::MatrixXd> llt;
  double tau = 0.0;
  int dim = 0;
};
NegHessianFactor factor_neg_hessian(const Eigen::MatrixXd& neg_hessian);

NewtonReport newton_map(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_init,
                        const NewtonOptions& opt = {});

/// Implicit derivative of the mode: solves H dz = -lambda_g S_g zeta_hat with H the negative Hessian.
Eigen::VectorXd dzeta_drho(const Model& model, const Eigen::VectorXd& zeta_hat, const Eigen::VectorXd& rho, int g);
std::vector<Eigen::VectorXd> dzeta_drho_all(const NegHessianFactor& f, const Model& model,
                                            const Eigen::VectorXd& zeta_hat, const Eigen::VectorXd& rho);

/// Pseudo-determinant log|S_lambda|_+ and its rho-gradient.
struct PenaltyLogDet {
  double value = 0.0;
  Eigen::VectorXd gradient;
  int rank = 0;
};
PenaltyLogDet penalty_log_det(const Model& model, const Eigen::VectorXd& rho);

struct LamlEval {
  double value = 0.0;
  double log_posterior = 0.0;   // L(zeta_hat)
  double half_log_det_S = 0.0;  // 0.5 log|S|+
  double neg_half_log_det_H = 0.0;
  double null_space_term = 0.0;  // (Mp / 2) log 2 pi
  int null_space_dim = 0;
  Eigen::VectorXd gradient;
  bool usable = true;
  double hessian_perturbation = 0.0;
};

/// LAML at a mode already found for rho. With gradient=false only the value is computed.
LamlEval laml_at(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_hat, bool gradient,
                 const GammaOptions& gopt = {});

/// Fits the mode for rho (warm-started from zeta_init) and evaluates LAML there.
LamlEval laml(const Model& model, const Eigen::VectorXd& rho, const Eigen::VectorXd& zeta_init, bool gradient = true,
              Eigen::VectorXd* zeta_out = nullptr, const NewtonOptions& nopt = {});

struct TraceRow {
  int iteration = 0;
  double laml = 0.0;
  double grad_norm = 0.0;
  Eigen::VectorXd rho;
};

struct FitResult {
  Eigen::VectorXd zeta;
  Eigen::VectorXd rho;
  NewtonReport newton;
  LamlEval laml;
  std::vector<TraceRow> trace;
  int outer_iterations = 0;
  bool converged = false;
  std::string message;
};

/// Trace-matching starting values for rho.
Eigen::VectorXd default_rho_init(const Model& model, const Eigen::VectorXd& zeta);

/// Full fit: staged Newton, then BFGS over rho on LAML. Stores frozen centring statistics
/// of every nested effect into the model.
FitResult fit(Model& model);

/// Records training centring statistics at zeta into the model.
void freeze_centring(Model& model, const Eigen::VectorXd& zeta);

constexpr double kRhoBound = 18.0;

}  // namespace nestgam
