#pragma once

#include <Eigen/Core>

namespace difftomo {

/// Symmetric positive definite covariance with a whitening factor L
/// satisfying L^T L = inverse(matrix()).
class Covariance {
 public:
  Covariance() = default;

  static Covariance identity(int n);
  static Covariance diagonal(const Eigen::VectorXd& variances);
  static Covariance from_matrix(const Eigen::MatrixXd& gamma);
  static Covariance from_precision(const Eigen::MatrixXd& precision);

  int size() const { return static_cast<int>(gamma_.rows()); }
  bool is_diagonal() const { return diagonal_; }
  const Eigen::MatrixXd& matrix() const { return gamma_; }
  const Eigen::MatrixXd& precision() const { return precision_; }
  /// Upper-triangular whitening factor.
  const Eigen::MatrixXd& factor() const { return factor_; }
  const Eigen::MatrixXd& factor_inverse() const { return factor_inv_; }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;          // gamma v
  Eigen::VectorXd apply_inverse(const Eigen::VectorXd& v) const;  // gamma^{-1} v
  Eigen::VectorXd whiten(const Eigen::VectorXd& v) const;         // L v
  Eigen::VectorXd unwhiten(const Eigen::VectorXd& v) const;       // L^{-1} v
  /// v^T gamma^{-1} v
  double norm2_inverse(const Eigen::VectorXd& v) const;

  /// Symmetric square root of the matrix (eigendecomposition).
  Eigen::MatrixXd sqrt_matrix() const;

 private:
  Eigen::MatrixXd gamma_, precision_, factor_, factor_inv_;
  bool diagonal_ = false;
};

}  // namespace difftomo
