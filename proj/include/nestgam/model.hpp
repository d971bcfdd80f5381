#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nestgam/basis.hpp"
#include "nestgam/family.hpp"
#include "nestgam/io.hpp"
#include "nestgam/transform.hpp"

namespace nestgam {

struct SmoothSpec {
  std::string column;
  int k = 10;
  int degree = 3;
  int penalty_order = 2;
  std::optional<bool> center;
};

struct TransformSpec {
  TransformKind kind = TransformKind::LinearIndex;
  // exp_smooth
  std::string column;
  std::vector<std::string> design;  // extra columns of the smoothing-weight model
  std::optional<double> z0;
  std::optional<double> omega_init;
  // kernel_smooth
  std::vector<std::string> coords;
  std::string value_column;
  int n_neighbors = 10;
  std::optional<std::vector<double>> log_precision_init;
  // linear_index
  std::vector<std::string> columns;
  std::optional<std::vector<double>> init;
};

struct InnerPenaltySpec {
  int difference_order = 0;  // 0 = none
  bool ridge = false;
};

struct NestedSpec {
  std::string name;
  TransformSpec transform;
  int k = 10;
  int degree = 6;
  int penalty_order = 2;
  InnerPenaltySpec inner;
};

enum class TermType { Parametric, Smooth, Nested };

struct TermSpec {
  TermType type = TermType::Parametric;
  std::vector<std::string> columns;  // parametric
  bool ridge = false;                // parametric: identity penalty with its own smoothing parameter
  SmoothSpec smooth;
  NestedSpec nested;
  std::string label() const;
};

struct PredictorSpec {
  std::string name;
  LinkKind link = LinkKind::Identity;
  bool intercept = true;
  double offset = 0.0;  // constant added to the predictor
  std::vector<TermSpec> terms;
};

struct FitOptions {
  int max_newton = 200;
  double newton_tol = 1e-8;
  int max_outer = 100;
  double outer_grad_tol = 1e-5;
  double outer_rel_tol = 1e-8;
  std::optional<std::vector<double>> rho_init;
  bool fixed_rho = false;
  double level = 0.95;
  int grid_points = 200;
};

struct ModelSpec {
  std::string family = "gaussian_ls";
  std::string response = "y";
  std::vector<PredictorSpec> predictors;
  double pi_bound = 0.05;
  double c = 1.0;
  FitOptions fit;
};

enum class SegKind { Gamma, Outer, Inner };

/// Contiguous coefficient range owned by one term (gamma) or one half of a nested effect.
struct Segment {
  SegKind kind = SegKind::Gamma;
  int start = 0, len = 0;
  int predictor = 0;
  int effect = -1;  // nested effect index for Outer/Inner
  int term = -1;    // index into Model::gamma for Gamma
  bool linear = false;
  std::string label;
};

struct PenaltyBlock {
  int start = 0, size = 0;
  Eigen::MatrixXd S;
  int null_dim = 0;
  std::string label;
};

/// Parametric or standard-smooth term within one predictor.
struct GammaTerm {
  TermType type = TermType::Parametric;
  int predictor = 0;
  int segment = -1;
  bool intercept = false;
  std::vector<std::string> columns;
  SplineBasis basis;
  Eigen::MatrixXd centre_map;  // empty when the smooth is not centred
  std::string label;
  Eigen::MatrixXd design(const DataTable& data) const;
};

/// Nested effect s(s~(x; a)) with frozen training inputs.
struct NestedEffect {
  std::string name;
  int predictor = 0;
  int outer_seg = -1, inner_seg = -1;
  TransformSpec tspec;
  ConstrainedOuterBasis outer;
  Eigen::VectorXd a_init;
  // linear_index
  Eigen::VectorXd col_means;
  Eigen::MatrixXd sigma_hat;
  // kernel_smooth reference set
  Eigen::MatrixXd ref_points;
  Eigen::VectorXd ref_values;
  /// Centring statistics at the fitted a (filled after fitting).
  std::optional<FrozenCentre> frozen;
  TransformKind kind() const { return tspec.kind; }
};

/// Data-dependent inputs for one nested effect.
struct NestedInput {
  Eigen::VectorXd series;
  ExpSmoothConfig es;
  KernelSmoothConfig ks;
  Eigen::MatrixXd Xc;
};

/// Everything that depends on a particular data table.
struct Design {
  int n = 0;
  std::vector<Eigen::MatrixXd> Z;  // per gamma term
  std::vector<NestedInput> inputs;  // per nested effect
  Eigen::ArrayXd y;
  bool has_y = false;
};

class Model {
 public:
  ModelSpec spec;
  std::shared_ptr<const Family> family;
  std::vector<LinkKind> links;
  int m = 0;
  int p = 0;
  std::vector<Segment> segments;
  std::vector<GammaTerm> gamma;
  std::vector<NestedEffect> nested;
  std::vector<PenaltyBlock> penalties;
  Design train;
  KnotRange knot_range;

  int n() const { return train.n; }
  int n_penalties() const { return static_cast<int>(penalties.size()); }
  Eigen::VectorXd initial_zeta() const;
  /// Total penalty sum_g exp(rho_g) S_g embedded in p x p.
  Eigen::MatrixXd S_lambda(const Eigen::VectorXd& rho) const;
  Eigen::MatrixXd S_embedded(int g) const;
  /// Penalty null-space dimension of the total penalty.
  int null_space_dim() const;
  /// Segment indices per term label, used for edf attribution.
  std::vector<std::pair<std::string, std::vector<int>>> term_segments() const;
  /// Evaluates nested transform at parameter a on the training design.
  TransformState eval_transform(int effect, const Eigen::VectorXd& a, int order) const;
  TransformState eval_transform(int effect, const NestedInput& in, const Eigen::VectorXd& a, int order,
                                const FrozenCentre* frozen) const;
};

Model build(const ModelSpec& spec, const DataTable& data);

/// Design for new data using frozen training statistics.
Design make_design(const Model& model, const DataTable& data, bool require_response);

}  // namespace nestgam
