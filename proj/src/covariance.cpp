#include "difftomo/covariance.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  require(m.rows() == m.cols() && m.rows() > 0, ErrorKind::InvalidCovariance,
          std::string(what) + " must be square and non-empty");
  require(m.allFinite(), ErrorKind::InvalidCovariance, std::string(what) + " has non-finite entries");
  const double scale = m.cwiseAbs().maxCoeff();
  require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, ErrorKind::InvalidCovariance,
          std::string(what) + " is not symmetric");
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, ErrorKind::InvalidCovariance,
          std::string(what) + " is not positive definite");
  const Eigen::VectorXd d = llt.matrixL().toDenseMatrix().diagonal();
  require(d.minCoeff() > 0.0 && d.maxCoeff() / d.minCoeff() < 1e8, ErrorKind::InvalidCovariance,
          std::string(what) + " is numerically singular");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

}  // namespace

Covariance Covariance::identity(int n) {
  require(n > 0, ErrorKind::InvalidCovariance, "covariance size must be positive");
  return diagonal(Eigen::VectorXd::Ones(n));
}

Covariance Covariance::diagonal(const Eigen::VectorXd& v) {
  require(v.size() > 0 && v.allFinite() && v.minCoeff() > 0.0, ErrorKind::InvalidCovariance,
          "diagonal covariance needs positive finite variances");
  Covariance c;
  c.diagonal_ = true;
  c.gamma_ = v.asDiagonal();
  c.precision_ = v.cwiseInverse().asDiagonal();
  c.factor_ = v.cwiseSqrt().cwiseInverse().asDiagonal();
  c.factor_inv_ = v.cwiseSqrt().asDiagonal();
  return c;
}

Covariance Covariance::from_matrix(const Eigen::MatrixXd& gamma) {
  check_symmetric(gamma, "covariance");
  Covariance c;
  c.gamma_ = 0.5 * (gamma + gamma.transpose());
  c.precision_ = spd_inverse(c.gamma_, "covariance");
  Eigen::LLT<Eigen::MatrixXd> llt(c.precision_);
  require(llt.info() == Eigen::Success, ErrorKind::InvalidCovariance, "precision is not positive definite");
  c.factor_ = llt.matrixU();
  c.factor_inv_ = c.factor_.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(gamma.rows(), gamma.cols()));
  c.diagonal_ = c.gamma_.isDiagonal(0.0);
  return c;
}

Covariance Covariance::from_precision(const Eigen::MatrixXd& precision) {
  check_symmetric(precision, "precision");
  Covariance c;
  c.precision_ = 0.5 * (precision + precision.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(c.precision_);
  require(llt.info() == Eigen::Success, ErrorKind::InvalidCovariance, "precision is not positive definite");
  c.gamma_ = spd_inverse(c.precision_, "precision");
  c.factor_ = llt.matrixU();
  c.factor_inv_ = c.factor_.triangularView<Eigen::Upper>().solve(
      Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  c.diagonal_ = c.precision_.isDiagonal(0.0);
  return c;
}

Eigen::VectorXd Covariance::apply(const Eigen::VectorXd& v) const {
  if (diagonal_) return gamma_.diagonal().cwiseProduct(v);
  return gamma_ * v;
}

Eigen::VectorXd Covariance::apply_inverse(const Eigen::VectorXd& v) const {
  if (diagonal_) return precision_.diagonal().cwiseProduct(v);
  return precision_ * v;
}

Eigen::VectorXd Covariance::whiten(const Eigen::VectorXd& v) const {
  if (diagonal_) return factor_.diagonal().cwiseProduct(v);
  return factor_.triangularView<Eigen::Upper>() * v;
}

Eigen::VectorXd Covariance::unwhiten(const Eigen::VectorXd& v) const {
  if (diagonal_) return factor_inv_.diagonal().cwiseProduct(v);
  return factor_inv_.triangularView<Eigen::Upper>() * v;
}

double Covariance::norm2_inverse(const Eigen::VectorXd& v) const { return v.dot(apply_inverse(v)); }

Eigen::MatrixXd Covariance::sqrt_matrix() const {
  if (diagonal_) return gamma_.diagonal().cwiseSqrt().asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma_);
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace difftomo
