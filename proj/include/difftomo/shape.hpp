#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "difftomo/covariance.hpp"
#include "difftomo/fem_model.hpp"
#include "difftomo/mesh.hpp"

namespace difftomo {

/// Star-shaped boundary r(t) = g0 + sum_k (g_{2k-1} cos kt + g_{2k} sin kt)
/// about `center`.
struct ShapeCoeffs {
  Eigen::VectorXd gamma = Eigen::VectorXd::Constant(1, 1.0);
  Eigen::Vector2d center = Eigen::Vector2d::Zero();

  int order() const { return static_cast<int>((gamma.size() - 1) / 2); }
  double radius(double theta) const;
  /// Basis function b_k(theta) for coefficient k.
  static double basis(int k, double theta);
  /// Throws invalid-shape unless the length is odd and r > 0 on 720 angles.
  void validate() const;
};

/// Counter-clockwise polygon with vertices at uniformly spaced angles.
std::vector<Eigen::Vector2d> boundary_from_coeffs(const ShapeCoeffs& coeffs, int n_points);

/// Signed shoelace area (positive for counter-clockwise).
double polygon_area(const std::vector<Eigen::Vector2d>& poly);
Eigen::Vector2d polygon_centroid(const std::vector<Eigen::Vector2d>& poly);

/// Hat-weighted inside fraction of every node: int u_k 1_inside / int u_k.
/// Triangles are clipped against the polygon exactly.
Eigen::VectorXd partial_volume(const Mesh& mesh, const std::vector<Eigen::Vector2d>& poly);

/// Optical values inside the inclusion; outside values come from the model
/// background.
struct InclusionValues {
  double mu_a = 0.0;
  double diff = 0.0;
};

struct ShapeOptions {
  int n_points = 256;
  int quad_per_segment = 32;
};

/// Nodal parameters with partial-volume blending across the boundary.
ParamField shape_params(const FemModel& model, const InclusionValues& inc, const ShapeCoeffs& coeffs,
                        const ShapeOptions& opts = {});

/// Stacked measurement vector (as FemModel::forward) for the shape.
Eigen::VectorXd shape_forward(const FemModel& model, const InclusionValues& inc,
                              const ShapeCoeffs& coeffs, const ShapeOptions& opts = {});

/// d data / d gamma_k = int rho(p(t)) (x_int - x_ext) b_k(t) r(t) dt, with the
/// PMDF rho interpolated from nodal Jacobian columns divided by the lumped
/// mass. Throws invalid-shape if the boundary leaves the mesh.
Eigen::MatrixXd shape_jacobian(const FemModel& model, const InclusionValues& inc,
                               const ShapeCoeffs& coeffs, const ShapeOptions& opts = {});

struct ShapeResult {
  ShapeCoeffs coeffs;
  std::vector<double> misfits;  // one per accepted step, first is the start
  int iterations = 0;
  int rejected = 0;
};

struct ShapeReconOptions {
  /// Damping relative to the largest diagonal entry of A^T A.
  double lm_lambda = 1e-2;
  int max_iterations = 20;
  double rel_tol = 1e-10;
  ShapeOptions shape{};
};

/// Levenberg-Marquardt on the shape coefficients with whitened data
/// (gamma_e empty means identity).
ShapeResult shape_reconstruct(const FemModel& model, const Eigen::VectorXd& data,
                              const ShapeCoeffs& initial, const InclusionValues& inc,
                              const ShapeReconOptions& opts = {}, const Covariance& gamma_e = {});

void write_shape_coeffs(const ShapeCoeffs& coeffs, const std::string& path);
ShapeCoeffs read_shape_coeffs(const std::string& path);

/// Two nodal level sets; a node is interior for a parameter when its
/// level set is <= 0.
struct LevelSetState {
  Eigen::VectorXd phi_mu, phi_d;
  double mu_int = 0.0, d_int = 0.0;
  double mu_ext = 0.0, d_ext = 0.0;

  ParamField params(double c) const;
};

/// Signed distance to a union of circles (negative inside), each circle
/// given as (x, y, radius). A positive cap truncates values to [-cap, cap].
Eigen::VectorXd circle_level_set(const Mesh& mesh, const std::vector<Eigen::Vector3d>& circles,
                                 double cap = 0.0);

struct LevelSetOptions {
  double dt = 0.5;       // level-set step; the forcing is scaled to unit max norm
  double interior_dt = 0.0;  // step for the interior values; 0 keeps them fixed
  int iterations = 10;
  int smoothing_sweeps = 5;  // Jacobi sweeps of (M + h^2 K) f = M g
  double band = 0.0;         // narrow band half width; 0 updates everywhere
  /// Step halvings tried when a step raises the misfit; 0 accepts every
  /// step as is. Evolution stops when no halving helps.
  int max_halvings = 6;
};

struct LevelSetResult {
  LevelSetState state;
  std::vector<double> misfits;  // before the first and after every accepted step
};

/// Explicit Euler evolution with forcing f_x = -L^-1 ((x_int - x_ext) s_x),
/// s = F'^* Ge^-1 (y - F). The model must reconstruct both parameters.
LevelSetResult levelset_evolve(const FemModel& model, const Eigen::VectorXd& data,
                               const LevelSetState& state, const LevelSetOptions& opts = {},
                               const Covariance& gamma_e = {});

/// Number of edge-connected components of the nodes where mask is true.
int count_components(const Mesh& mesh, const std::vector<bool>& mask);

void write_level_set(const LevelSetState& state, const std::string& path);

}  // namespace difftomo
