#pragma once

#include <Eigen/Core>

#include "difftomo/forward.hpp"
#include "difftomo/mesh.hpp"
#include "difftomo/nonlinear.hpp"

namespace difftomo {

/// Lower bound applied to D by projection (mm).
inline constexpr double kMinDiffusion = 1e-4;

enum class Unknowns { Absorption, Diffusion, Both };

/// Nonlinear FEM forward map. x holds nodal mu_a, nodal D, or [mu_a; D];
/// parameters not in x stay at the background. Data are the detector-major
/// measurements stacked as [Re; Im] (real part only when omega = 0).
/// Blocks are per source.
class FemModel : public Model {
 public:
  FemModel(Mesh mesh, SourceDetectorLayout layout, ParamField background, double omega,
           Unknowns unknowns = Unknowns::Both, double zeta = kDefaultZeta);

  int parameter_count() const override;
  int data_count() const override;
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const override;
  std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_adjoint(
      const Eigen::VectorXd& x,
      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weights) const override;
  std::vector<std::vector<int>> blocks() const override;
  bool admissible(const Eigen::VectorXd& x) const override;
  /// mu_a to [0, inf), D to [kMinDiffusion, inf).
  Eigen::VectorXd project(const Eigen::VectorXd& x) const override;

  ParamField params(const Eigen::VectorXd& x) const;
  Eigen::VectorXd to_vector(const ParamField& p) const;
  /// Complex measurements (detectors x sources) to the stacked real vector.
  Eigen::VectorXd stack(const Eigen::MatrixXcd& data) const;

  const Mesh& mesh() const { return mesh_; }
  const SourceDetectorLayout& layout() const { return layout_; }
  const ParamField& background() const { return background_; }
  const SystemMatrix& system() const { return sys_; }
  double omega() const { return omega_; }
  Unknowns unknowns() const { return unknowns_; }
  bool complex_data() const { return omega_ != 0.0; }

  /// Nodal fields U (n x sources) and Lagrangian duals Z = K^-1 M^T conj(W),
  /// with W the whitened residual Ge^-1 (y - F(x)) in complex form.
  struct Fields {
    Eigen::MatrixXcd u;
    Eigen::MatrixXcd z;
  };
  Fields fields(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const;
  /// Re sum_s Z_s^T (dK/dx_k) U_s for every parameter k.
  Eigen::VectorXd contract(const Eigen::MatrixXcd& z, const Eigen::MatrixXcd& u) const;
  /// Stacked real weights to the complex detectors x sources matrix.
  Eigen::MatrixXcd unstack(const Eigen::VectorXd& w) const;

 private:
  Mesh mesh_;
  SourceDetectorLayout layout_;
  ParamField background_;
  double omega_;
  Unknowns unknowns_;
  SystemMatrix sys_;
  Eigen::MatrixXcd loads_;
  Eigen::MatrixXd meas_;
};

struct KktResidual {
  Eigen::VectorXd res_x;    // alpha Psi'(x) + Re <Z, P_x U>
  Eigen::MatrixXcd res_u;   // K^T Z - M^T conj(W)
  Eigen::MatrixXcd res_z;   // K U - q
};

/// First-order optimality residuals of the Lagrangian for an objective
/// built on a FemModel. Throws invalid-argument on other models or shapes.
KktResidual kkt_residual(const Objective& obj, const Eigen::VectorXd& x, const Eigen::MatrixXcd& u,
                         const Eigen::MatrixXcd& z);

}  // namespace difftomo
