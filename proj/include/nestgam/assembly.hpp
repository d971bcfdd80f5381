#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "nestgam/model.hpp"

namespace nestgam {

/// Primary variable of a segment: a linear predictor (eta) or a transformed covariate.
struct PVar {
  bool is_t = false;
  int idx = 0;
  bool operator==(const PVar& o) const { return is_t == o.is_t && idx == o.idx; }
};

/// Per-effect quantities at the current coefficients.
struct EffectEval {
  TransformState ts;
  std::vector<Eigen::MatrixXd> B;  // outer basis derivatives 0..order at s~
  Eigen::ArrayXd e, f, g;          // B1 b, B2 b, B3 b
  ScalingPenalty q;
};

/// Evaluates the likelihood side of the model at a given coefficient vector and
/// exposes the primary-variable derivative arrays. Keeps transform caches keyed on
/// the inner segment values so repeated evaluations that only move gamma/b reuse them.
class Evaluator {
 public:
  explicit Evaluator(const Model& model);
  Evaluator(const Model& model, const Design& design, bool frozen);

  /// order: 0 value, 1 gradient, 2 Hessian, 3 rho-derivatives of the Hessian.
  void set(const Eigen::VectorXd& zeta, int order);

  const Model& model() const { return *model_; }
  const Design& design() const { return *design_; }
  int order() const { return order_; }
  const Eigen::VectorXd& zeta() const { return zeta_; }
  double loglik() const { return loglik_; }
  const Eigen::ArrayXd& loglik_i() const { return pd_.ll; }
  double scaling_total() const;
  const std::vector<Eigen::ArrayXd>& eta() const { return eta_; }
  const std::vector<Eigen::ArrayXd>& theta() const { return theta_; }
  const PredictorDerivs& pred() const { return pd_; }
  const EffectEval& effect(int u) const { return eff_[u]; }
  int cache_hits() const { return cache_hits_; }

  PVar pvar(int seg) const;
  /// Jacobian of the segment's primary variable with respect to its coefficients.
  const Eigen::MatrixXd& M(int seg) const;
  int predictor_of(const PVar& x) const;

  Eigen::ArrayXd D1(const PVar& x) const;
  Eigen::ArrayXd D2(const PVar& x, const PVar& y) const;
  Eigen::ArrayXd D3(const PVar& x, const PVar& y, const PVar& z) const;

 private:
  const Eigen::ArrayXd* dvar(const PVar& x, int r) const;  // nullptr means ones (eta) or zero handled by caller

  const Model* model_;
  const Design* design_;
  bool frozen_ = false;
  int order_ = -1;
  Eigen::VectorXd zeta_;
  double loglik_ = 0.0;
  std::vector<Eigen::ArrayXd> eta_, theta_;
  PredictorDerivs pd_;
  std::vector<EffectEval> eff_;
  std::vector<Eigen::VectorXd> cached_a_;
  std::vector<int> cached_order_;
  int cache_hits_ = 0;
  Eigen::ArrayXd ones_;
};

struct PosteriorEval {
  double value = 0.0;
  double loglik = 0.0;
  double penalty_value = 0.0;
  std::vector<double> scaling_penalty_values;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Names of the exceptional rho-derivative blocks, in routing-table order.
enum class GammaRule {
  General,
  BetaAlphaAlpha,
  AlphaBetaBeta,
  ABB,
  Psi3AlphaBeta,
  AlphaAlphaBeta,
  BetaAlphaBeta,
  Psi3AB,
  BAB,
  AAB,
  AAA,
  BAA,
  Psi3AA,
  AAPsi2,
  BetaPsi1Alpha,
  BPsi1A,
  AlphaPsi1Beta,
  APsi1B,
};
constexpr int kNumGammaRules = 18;
std::string to_string(GammaRule r);
std::vector<GammaRule> exceptional_rules();

struct GammaOptions {
  /// Counts how often each rule fired (optional).
  std::map<std::string, long>* coverage = nullptr;
  /// Mutation hook for tests: the named rule's extra terms are scaled by `corrupt_factor`.
  std::string corrupt_rule;
  double corrupt_factor = 1.5;
};

/// Routing table keyed on the segment-kind triple (row, column, direction).
GammaRule route_gamma(const Model& model, int row_seg, int col_seg, int dir_seg);

PosteriorEval log_posterior(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho, int order = 0);
Eigen::VectorXd gradient(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho);
Eigen::MatrixXd hessian(const Model& model, const Eigen::VectorXd& zeta, const Eigen::VectorXd& rho);

/// Posterior pieces from an evaluator already set at the required order.
PosteriorEval assemble(const Evaluator& ev, const Eigen::VectorXd& rho, int order);
/// Hessian of the log-likelihood alone.
Eigen::MatrixXd loglik_hessian(const Evaluator& ev);
/// Gradient of the log-likelihood alone.
Eigen::VectorXd loglik_gradient(const Evaluator& ev);

/// Directional derivative of the log-likelihood Hessian along v (evaluator at order 3).
Eigen::MatrixXd loglik_hessian_dir(const Evaluator& ev, const Eigen::VectorXd& v, const GammaOptions& opt = {});

/// dH/drho_g for every g, given dzeta/drho_g; H is the Hessian of the log-posterior.
std::vector<Eigen::MatrixXd> hessian_rho_derivs(const Model& model, const Eigen::VectorXd& zeta_hat,
                                                const Eigen::VectorXd& rho, const std::vector<Eigen::VectorXd>& dzeta,
                                                const GammaOptions& opt = {});
/// Same with an evaluator already set at order 3.
std::vector<Eigen::MatrixXd> hessian_rho_derivs(const Evaluator& ev, const Eigen::VectorXd& rho,
                                                const std::vector<Eigen::VectorXd>& dzeta, const GammaOptions& opt = {});

}  // namespace nestgam
