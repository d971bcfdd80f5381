#pragma once

#include <Eigen/Dense>
#include <vector>

namespace nestgam {

/// n x p x p array stored so that each (j,k) slice over observations is contiguous.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int n, int p) : n_(n), p_(p), d_(static_cast<size_t>(n) * p * p, 0.0) {}

  int n() const { return n_; }
  int p() const { return p_; }
  bool empty() const { return d_.empty(); }

  double& operator()(int i, int j, int k) { return d_[(static_cast<size_t>(j) * p_ + k) * n_ + i]; }
  double operator()(int i, int j, int k) const { return d_[(static_cast<size_t>(j) * p_ + k) * n_ + i]; }

  Eigen::Map<Eigen::ArrayXd> slice(int j, int k) {
    return Eigen::Map<Eigen::ArrayXd>(d_.data() + (static_cast<size_t>(j) * p_ + k) * n_, n_);
  }
  Eigen::Map<const Eigen::ArrayXd> slice(int j, int k) const {
    return Eigen::Map<const Eigen::ArrayXd>(d_.data() + (static_cast<size_t>(j) * p_ + k) * n_, n_);
  }

  /// Sum over observations of w_i * T(i,j,k).
  Eigen::MatrixXd contract(const Eigen::ArrayXd& w) const {
    Eigen::MatrixXd out(p_, p_);
    for (int j = 0; j < p_; ++j)
      for (int k = j; k < p_; ++k) out(j, k) = out(k, j) = (slice(j, k) * w).sum();
    return out;
  }

 private:
  int n_ = 0, p_ = 0;
  std::vector<double> d_;
};

/// n x p x p x p array, same layout convention as Tensor3.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int p) : n_(n), p_(p), d_(static_cast<size_t>(n) * p * p * p, 0.0) {}

  int n() const { return n_; }
  int p() const { return p_; }
  bool empty() const { return d_.empty(); }

  double& operator()(int i, int j, int k, int l) { return d_[idx(j, k, l) * n_ + i]; }
  double operator()(int i, int j, int k, int l) const { return d_[idx(j, k, l) * n_ + i]; }

  Eigen::Map<Eigen::ArrayXd> slice(int j, int k, int l) {
    return Eigen::Map<Eigen::ArrayXd>(d_.data() + idx(j, k, l) * n_, n_);
  }
  Eigen::Map<const Eigen::ArrayXd> slice(int j, int k, int l) const {
    return Eigen::Map<const Eigen::ArrayXd>(d_.data() + idx(j, k, l) * n_, n_);
  }

 private:
  size_t idx(int j, int k, int l) const { return (static_cast<size_t>(j) * p_ + k) * p_ + l; }
  int n_ = 0, p_ = 0;
  std::vector<double> d_;
};

}  // namespace nestgam
