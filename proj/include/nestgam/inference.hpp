#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "nestgam/model.hpp"
#include "nestgam/optimize.hpp"

namespace nestgam {

struct TermEdf {
  std::string label;
  int size = 0;
  double edf = 0.0;
};

struct FitState {
  Eigen::VectorXd zeta, rho;
  Eigen::MatrixXd neg_hessian;  // negative log-posterior Hessian at the mode
  Eigen::MatrixXd info;         // negative log-likelihood Hessian
  Eigen::MatrixXd V, F;
  std::vector<TermEdf> edf;
  double edf_total = 0.0;
  double loglik = 0.0;
  double aic = 0.0;
  double laml = 0.0;
  bool converged = false;
  std::vector<TraceRow> trace;
};

/// V = (I + S_lambda + Q)^-1 with Q the scaling-penalty Hessians, F = V I.
FitState posterior(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho);
/// Per-term edf (diagonal of F summed over each term's coefficients), total edf and AIC.
void edf_aic(const Model& model, FitState& state, double loglik);
FitState make_fit_state(const Model& model, const FitResult& fr);

struct EffectBand {
  Eigen::VectorXd grid, estimate, se, lower, upper;
  double level = 0.95;
};

/// Band for a nested effect at the rows of `data`, using the Jacobian with respect to
/// both inner and outer coefficients. The grid holds the transformed covariate values.
EffectBand nested_effect_band(const Model& model, const FitState& state, int effect, const DataTable& data,
                              double level = 0.95);
/// Band over a grid of transformed-covariate values with inner parameters held fixed.
EffectBand nested_effect_grid(const Model& model, const FitState& state, int effect, const Eigen::VectorXd& grid,
                              double level = 0.95);
/// Band for a standard smooth over a grid of its covariate.
EffectBand smooth_effect_grid(const Model& model, const FitState& state, int gamma_term, const Eigen::VectorXd& grid,
                              double level = 0.95);

struct Prediction {
  std::vector<Eigen::ArrayXd> eta, theta;
  Eigen::ArrayXd mean;
  bool scored = false;
  Eigen::ArrayXd log_score_i, crps_i;
  double log_score = 0.0;  // sum of -log p(y_i)
  double mean_log_score = 0.0;
  double crps = 0.0;  // mean
  double rmse = 0.0, mae = 0.0;
};

Prediction predict_and_score(const Model& model, const Eigen::VectorXd& zeta, const DataTable& data);

double normal_quantile(double p);

}  // namespace nestgam
