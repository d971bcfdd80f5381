#pragma once

#include <Eigen/Dense>
#include <array>
#include <memory>
#include <string>
#include <vector>

namespace nestgam {

constexpr int kMaxParams = 4;

/// Per-observation log-likelihood and partials to third order in the distribution
/// parameters (or, after chaining, in the linear predictors). Mixed entries are
/// stored for every index permutation.
struct FamilyDerivs {
  int m = 0;
  int order = 0;
  Eigen::ArrayXd ll;
  std::array<Eigen::ArrayXd, kMaxParams> d1;
  std::array<std::array<Eigen::ArrayXd, kMaxParams>, kMaxParams> d2;
  std::array<std::array<std::array<Eigen::ArrayXd, kMaxParams>, kMaxParams>, kMaxParams> d3;
};

/// Predictor-level derivatives share the layout of FamilyDerivs.
using PredictorDerivs = FamilyDerivs;

enum class LinkKind { Identity, Log };
std::string to_string(LinkKind k);
LinkKind link_from_string(const std::string& s);

struct LinkDerivs {
  Eigen::ArrayXd theta, d1, d2, d3;
};

LinkDerivs link_eval(LinkKind kind, const Eigen::ArrayXd& eta);

class Family {
 public:
  virtual ~Family() = default;
  virtual std::string name() const = 0;
  virtual int n_params() const = 0;
  /// Natural default link per parameter.
  virtual std::vector<LinkKind> default_links() const = 0;
  virtual FamilyDerivs derivs(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta, int order) const = 0;
  /// Continuous ranked probability score per observation.
  virtual Eigen::ArrayXd crps(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta) const = 0;
  /// Mean of the response.
  virtual Eigen::ArrayXd mean(const std::vector<Eigen::ArrayXd>& theta) const = 0;
  virtual bool valid(const std::vector<Eigen::ArrayXd>& theta) const = 0;
};

/// Gaussian with parameters (mean, variance).
class GaussianLocationScale : public Family {
 public:
  std::string name() const override { return "gaussian_ls"; }
  int n_params() const override { return 2; }
  std::vector<LinkKind> default_links() const override { return {LinkKind::Identity, LinkKind::Log}; }
  FamilyDerivs derivs(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta, int order) const override;
  Eigen::ArrayXd crps(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta) const override;
  Eigen::ArrayXd mean(const std::vector<Eigen::ArrayXd>& theta) const override { return theta[0]; }
  bool valid(const std::vector<Eigen::ArrayXd>& theta) const override;
};

std::unique_ptr<Family> make_family(const std::string& name);

/// Partials in (mean, log variance) for the Gaussian location-scale model.
FamilyDerivs gaussian_ls_derivs(const Eigen::ArrayXd& y, const Eigen::ArrayXd& mu, const Eigen::ArrayXd& log_var);

/// Composes parameter partials with per-parameter inverse links.
PredictorDerivs chain_to_eta(const FamilyDerivs& fam, const std::vector<LinkDerivs>& links);

/// Derivatives involving one transformed covariate feeding predictor j through an
/// outer smooth with derivatives eta_s, eta_ss, eta_sss.
struct StildeDerivs {
  Eigen::ArrayXd s, ss, sss, es, ees, ess;
};
StildeDerivs chain_to_stilde(const PredictorDerivs& pred, int j, const Eigen::ArrayXd& eta_s,
                             const Eigen::ArrayXd& eta_ss, const Eigen::ArrayXd& eta_sss);

/// Gaussian CRPS in closed form.
Eigen::ArrayXd gaussian_crps(const Eigen::ArrayXd& y, const Eigen::ArrayXd& mu, const Eigen::ArrayXd& sigma);

}  // namespace nestgam
