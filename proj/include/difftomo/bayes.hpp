#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "difftomo/covariance.hpp"
#include "difftomo/mesh.hpp"
#include "difftomo/nonlinear.hpp"

namespace difftomo {

enum class NoiseKind { Poisson, Relative, White };

/// Gaussian measurement noise e ~ N(mean, gamma_e).
struct NoiseModel {
  NoiseKind kind = NoiseKind::White;
  Covariance gamma_e;
  Eigen::VectorXd mean;

  /// L_e with L_e^T L_e = gamma_e^-1.
  const Eigen::MatrixXd& whitening() const { return gamma_e.factor(); }
  /// Independent draw of e, deterministic per seed.
  Eigen::VectorXd sample(std::uint64_t seed) const;
};

/// poisson:  gamma_e = level^2 diag(y)      (y > 0)
/// relative: gamma_e = level^2 diag(y^2)    (y != 0)
/// white:    gamma_e = level^2 I
NoiseModel noise_covariance(const Eigen::VectorXd& y, NoiseKind kind, double level = 1.0);

enum class PriorKind { Mrf, PdeDiffusivity, Database, Correlation };

/// Gaussian prior N(mean, covariance) with its precision matrix.
struct PriorModel {
  PriorKind kind = PriorKind::Mrf;
  Eigen::SparseMatrix<double> precision;  // includes the eps_pd ridge
  Eigen::MatrixXd covariance;
  Eigen::VectorXd mean;
  double eps_pd = 0.0;

  int size() const { return static_cast<int>(mean.size()); }
  Covariance gamma() const;
  /// Prior term for a nonlinear Objective.
  Prior as_prior() const;
};

/// Ridge 1e-8 * trace / N used when eps_pd is negative.
double default_ridge(const Eigen::SparseMatrix<double>& m);

/// P1 stiffness int k grad u_l . grad u_m with the nodal field k averaged
/// per element.
Eigen::SparseMatrix<double> weighted_stiffness(const Mesh& mesh, const Eigen::VectorXd& k);

/// Weighted stiffness matrix int k grad u_l . grad u_m plus eps_pd I, with
/// k a positive nodal field. eps_pd < 0 picks default_ridge.
PriorModel smoothness_prior(const Mesh& mesh, const Eigen::VectorXd& k, double eps_pd = -1.0,
                            const Eigen::VectorXd& mean = Eigen::VectorXd());

/// Graph Laplacian of the mesh edges times `weight`, plus eps_pd I.
PriorModel mrf_prior(const Mesh& mesh, double weight, double eps_pd = -1.0,
                     const Eigen::VectorXd& mean = Eigen::VectorXd());

/// Sample mean and covariance of user supplied fields (at least two).
PriorModel database_prior(const std::vector<Eigen::VectorXd>& fields, double eps_pd = -1.0);

/// Squared-exponential correlation sigma^2 exp(-|r_i - r_j|^2 / (2 length^2))
/// between nodes.
PriorModel correlation_prior(const Mesh& mesh, const Eigen::VectorXd& mean, double sigma,
                             double length, double eps_pd = -1.0);

/// Draws mean + Gamma_x^{1/2} xi; draw i uses its own generator seeded from
/// (seed, i), so draws do not depend on how many are taken.
std::vector<Eigen::VectorXd> sample_prior(const PriorModel& prior, int n, std::uint64_t seed);

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Linear Gaussian model y = A x + e:
///   mean = x* + Gx A^T Gy^-1 (y - A x* - e*),  cov = Gx - Gx A^T Gy^-1 A Gx,
/// with Gy = A Gx A^T + Ge.
Posterior gaussian_posterior(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                             const Covariance& gamma_x, const Covariance& gamma_e,
                             const Eigen::VectorXd& x_star = Eigen::VectorXd(),
                             const Eigen::VectorXd& e_star = Eigen::VectorXd());

struct ApproxErrorStats {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  int samples = 0;

  /// Noise model with gamma_e + covariance and mean shifted by `mean`.
  NoiseModel corrected(const NoiseModel& noise) const;
};

/// Sample statistics of fine(x_i) - coarse(x_i) over prior draws. Draws are
/// projected onto the coarse model's admissible set first.
ApproxErrorStats approximation_error(const PriorModel& prior, const Model& fine, const Model& coarse,
                                     int n_samples, std::uint64_t seed);

void write_approx_error(const ApproxErrorStats& stats, const std::string& mean_path,
                        const std::string& cov_path);
ApproxErrorStats read_approx_error(const std::string& mean_path, const std::string& cov_path);

/// x -> inner(map x); map is typically a mesh interpolation operator.
class MappedModel : public Model {
 public:
  MappedModel(std::shared_ptr<const Model> inner, Eigen::SparseMatrix<double> map);
  int parameter_count() const override { return static_cast<int>(map_.cols()); }
  int data_count() const override { return inner_->data_count(); }
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const override;
  std::vector<std::vector<int>> blocks() const override { return inner_->blocks(); }
  bool admissible(const Eigen::VectorXd& x) const override;

 private:
  std::shared_ptr<const Model> inner_;
  Eigen::SparseMatrix<double> map_;
};

/// Reference-corrected model F_h(x) + y_ref - F_h(x_ref); returns y_ref
/// exactly at x_ref.
class CorrectedModel : public Model {
 public:
  CorrectedModel(std::shared_ptr<const Model> coarse, Eigen::VectorXd x_ref, Eigen::VectorXd y_ref);
  int parameter_count() const override { return inner_->parameter_count(); }
  int data_count() const override { return inner_->data_count(); }
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override { return inner_->jacobian(x); }
  Eigen::VectorXd adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const override {
    return inner_->adjoint(x, w);
  }
  std::vector<std::vector<int>> blocks() const override { return inner_->blocks(); }
  bool admissible(const Eigen::VectorXd& x) const override { return inner_->admissible(x); }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const override { return inner_->project(x); }
  const Eigen::VectorXd& offset() const { return offset_; }

 private:
  std::shared_ptr<const Model> inner_;
  Eigen::VectorXd x_ref_, y_ref_, offset_;
};

}  // namespace difftomo
