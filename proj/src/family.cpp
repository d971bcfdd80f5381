#include "nestgam/family.hpp"

#include <boost/math/constants/constants.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "nestgam/error.hpp"

namespace nestgam {

std::string to_string(LinkKind k) { return k == LinkKind::Identity ? "identity" : "log"; }

LinkKind link_from_string(const std::string& s) {
  if (s == "identity") return LinkKind::Identity;
  if (s == "log") return LinkKind::Log;
  fail(ErrorCode::Config, "unknown link '" + s + "'");
}

LinkDerivs link_eval(LinkKind kind, const Eigen::ArrayXd& eta) {
  LinkDerivs l;
  const auto n = eta.size();
  if (kind == LinkKind::Identity) {
    l.theta = eta;
    l.d1 = Eigen::ArrayXd::Ones(n);
    l.d2 = Eigen::ArrayXd::Zero(n);
    l.d3 = Eigen::ArrayXd::Zero(n);
  } else {
    l.theta = eta.exp();
    l.d1 = l.theta;
    l.d2 = l.theta;
    l.d3 = l.theta;
  }
  return l;
}

bool GaussianLocationScale::valid(const std::vector<Eigen::ArrayXd>& theta) const {
  return theta.size() == 2 && theta[0].allFinite() && theta[1].allFinite() && (theta[1] > 0).all();
}

FamilyDerivs GaussianLocationScale::derivs(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta,
                                           int order) const {
  require(theta.size() == 2 && theta[0].size() == y.size() && theta[1].size() == y.size(),
          "gaussian_ls parameters are not aligned with the response");
  require(y.allFinite(), "response contains non-finite values", ErrorCode::Data);
  require(valid(theta), "gaussian_ls needs finite means and positive variances", ErrorCode::Numeric);
  const double l2pi = std::log(2.0 * boost::math::constants::pi<double>());
  const Eigen::ArrayXd r = y - theta[0];
  const Eigen::ArrayXd v = theta[1];
  const Eigen::ArrayXd iv = v.inverse();
  const Eigen::ArrayXd r2 = r.square();
  FamilyDerivs f;
  f.m = 2;
  f.order = order;
  f.ll = -0.5 * l2pi - 0.5 * v.log() - 0.5 * r2 * iv;
  if (order < 1) return f;
  f.d1[0] = r * iv;
  f.d1[1] = -0.5 * iv + 0.5 * r2 * iv.square();
  if (order < 2) return f;
  f.d2[0][0] = -iv;
  f.d2[0][1] = f.d2[1][0] = -r * iv.square();
  f.d2[1][1] = 0.5 * iv.square() - r2 * iv.cube();
  if (order < 3) return f;
  const auto n = y.size();
  f.d3[0][0][0] = Eigen::ArrayXd::Zero(n);
  const Eigen::ArrayXd mmv = iv.square();
  const Eigen::ArrayXd mvv = 2.0 * r * iv.cube();
  f.d3[0][0][1] = f.d3[0][1][0] = f.d3[1][0][0] = mmv;
  f.d3[0][1][1] = f.d3[1][0][1] = f.d3[1][1][0] = mvv;
  f.d3[1][1][1] = -iv.cube() + 3.0 * r2 * iv.square().square();
  return f;
}

Eigen::ArrayXd gaussian_crps(const Eigen::ArrayXd& y, const Eigen::ArrayXd& mu, const Eigen::ArrayXd& sigma) {
  const boost::math::normal_distribution<double> N;
  const double isqpi = 1.0 / std::sqrt(boost::math::constants::pi<double>());
  Eigen::ArrayXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double z = (y(i) - mu(i)) / sigma(i);
    out(i) = sigma(i) * (z * (2.0 * boost::math::cdf(N, z) - 1.0) + 2.0 * boost::math::pdf(N, z) - isqpi);
  }
  return out;
}

Eigen::ArrayXd GaussianLocationScale::crps(const Eigen::ArrayXd& y, const std::vector<Eigen::ArrayXd>& theta) const {
  return gaussian_crps(y, theta[0], theta[1].sqrt());
}

std::unique_ptr<Family> make_family(const std::string& name) {
  if (name == "gaussian_ls") return std::make_unique<GaussianLocationScale>();
  fail(ErrorCode::Config, "unknown family '" + name + "'");
}

PredictorDerivs chain_to_eta(const FamilyDerivs& fam, const std::vector<LinkDerivs>& links) {
  const int m = fam.m;
  require(static_cast<int>(links.size()) == m, "one link per distribution parameter is required");
  PredictorDerivs p;
  p.m = m;
  p.order = fam.order;
  p.ll = fam.ll;
  if (fam.order >= 1)
    for (int j = 0; j < m; ++j) p.d1[j] = fam.d1[j] * links[j].d1;
  if (fam.order >= 2)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k) {
        Eigen::ArrayXd v = fam.d2[j][k] * links[j].d1 * links[k].d1;
        if (j == k) v += fam.d1[j] * links[j].d2;
        p.d2[j][k] = v;
      }
  if (fam.order >= 3)
    for (int j = 0; j < m; ++j)
      for (int k = 0; k < m; ++k)
        for (int l = 0; l < m; ++l) {
          Eigen::ArrayXd v = fam.d3[j][k][l] * links[j].d1 * links[k].d1 * links[l].d1;
          if (j == l) v += fam.d2[j][k] * links[j].d2 * links[k].d1;
          if (k == l) v += fam.d2[j][k] * links[j].d1 * links[k].d2;
          if (j == k) v += fam.d2[j][l] * links[j].d2 * links[l].d1;
          if (j == k && k == l) v += fam.d1[j] * links[j].d3;
          p.d3[j][k][l] = v;
        }
  return p;
}

FamilyDerivs gaussian_ls_derivs(const Eigen::ArrayXd& y, const Eigen::ArrayXd& mu, const Eigen::ArrayXd& log_var) {
  require(mu.allFinite() && log_var.allFinite(), "gaussian_ls_derivs inputs must be finite");
  GaussianLocationScale fam;
  const FamilyDerivs f = fam.derivs(y, {mu, log_var.exp()}, 3);
  return chain_to_eta(f, {link_eval(LinkKind::Identity, mu), link_eval(LinkKind::Log, log_var)});
}

StildeDerivs chain_to_stilde(const PredictorDerivs& pred, int j, const Eigen::ArrayXd& es, const Eigen::ArrayXd& ess,
                             const Eigen::ArrayXd& esss) {
  require(pred.order >= 3, "stilde chain needs predictor derivatives to third order");
  require(j >= 0 && j < pred.m, "predictor index out of range");
  StildeDerivs d;
  const auto& l1 = pred.d1[j];
  const auto& l2 = pred.d2[j][j];
  const auto& l3 = pred.d3[j][j][j];
  d.s = l1 * es;
  d.ss = l2 * es.square() + l1 * ess;
  d.sss = l3 * es.cube() + 3.0 * l2 * es * ess + l1 * esss;
  d.es = l2 * es;
  d.ees = l3 * es;
  d.ess = l3 * es.square() + l2 * ess;
  return d;
}

}  // namespace nestgam
