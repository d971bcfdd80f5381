#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "nestgam/tensor.hpp"

namespace nestgam {

enum class TransformKind { ExpSmooth, KernelSmooth, LinearIndex };

std::string to_string(TransformKind k);
TransformKind transform_kind_from_string(const std::string& s);

/// Value and derivative stacks of one nested transformation. For exp_smooth and
/// kernel_smooth the first parameter is the log-scale a0.
struct TransformState {
  TransformKind kind = TransformKind::LinearIndex;
  Eigen::VectorXd a;
  Eigen::VectorXd s_tilde;
  Eigen::MatrixXd grad;
  Tensor3 hess;
  Tensor4 third;
  int order = 0;
  /// Centring statistics of the raw transform (general kinds only).
  double raw_mean = 0.0;
  Eigen::VectorXd raw_grad_mean;
  /// ML covariance of the centred design (linear_index only).
  Eigen::MatrixXd sigma_hat;
  int degenerate_rows = 0;

  int n() const { return static_cast<int>(s_tilde.size()); }
  int p() const { return static_cast<int>(a.size()); }
  bool linear() const { return kind == TransformKind::LinearIndex; }
};

/// Raw (unstandardized) stacks with respect to the body parameters only.
struct RawStack {
  Eigen::VectorXd val;
  Eigen::MatrixXd grad;
  Tensor3 hess;
  Tensor4 third;
  int order = 0;
  int degenerate_rows = 0;
};

/// Frozen training centring applied at prediction time.
struct FrozenCentre {
  double mean = 0.0;
  Eigen::VectorXd grad_mean;
};

struct ExpSmoothConfig {
  Eigen::MatrixXd design;  // n x q, rows drive the smoothing weight
  double z0 = 0.0;
};

struct KernelSmoothConfig {
  Eigen::MatrixXd points;                      // n x d query coordinates
  Eigen::MatrixXd ref_points;                  // N x d neighbor coordinates
  Eigen::VectorXd ref_values;                  // N neighbor values z
  std::vector<std::vector<int>> neighbor_sets;  // per query, indices into ref arrays
  int dim() const { return static_cast<int>(points.cols()); }
};

RawStack exp_smooth_raw(const Eigen::VectorXd& x, const ExpSmoothConfig& cfg, const Eigen::VectorXd& body, int max_deriv);
RawStack kernel_smooth_raw(const KernelSmoothConfig& cfg, const Eigen::VectorXd& body, int max_deriv);

/// Wraps raw stacks through centring and exp(a0) scaling. With `frozen`, the supplied
/// statistics replace the sample mean (max_deriv <= 1).
TransformState standardize(TransformKind kind, const RawStack& raw, const Eigen::VectorXd& a, int max_deriv,
                           const FrozenCentre* frozen = nullptr);

TransformState exp_smooth_eval(const Eigen::VectorXd& x, const ExpSmoothConfig& cfg, const Eigen::VectorXd& a,
                               int max_deriv, const FrozenCentre* frozen = nullptr);
TransformState kernel_smooth_eval(const KernelSmoothConfig& cfg, const Eigen::VectorXd& a, int max_deriv,
                                  const FrozenCentre* frozen = nullptr);
/// X must already be column-centred with training means.
TransformState linear_index_eval(const Eigen::MatrixXd& X, const Eigen::VectorXd& a, int max_deriv,
                                 const Eigen::MatrixXd* sigma_hat = nullptr);

struct ScalingPenalty {
  double c = 1.0;
  double variance = 0.0;
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
  std::optional<Eigen::MatrixXd> hess_rho;
};

/// Variance-scaling penalty (var - c)^2 and its derivatives. Linear-index states use
/// closed forms in the design covariance; other kinds use the general stack formulas.
ScalingPenalty scaling_penalty_eval(const TransformState& state, double c, const Eigen::VectorXd* da_drho = nullptr);
/// General stack formulas regardless of kind.
ScalingPenalty scaling_penalty_general(const TransformState& state, double c, const Eigen::VectorXd* da_drho = nullptr);

/// Logistic function and its first three derivatives.
struct Logistic {
  double v, d1, d2, d3;
};
Logistic logistic(double x);

}  // namespace nestgam
