#pragma once

#include <complex>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "difftomo/mesh.hpp"

namespace difftomo {

using cdouble = std::complex<double>;
using SpMatC = Eigen::SparseMatrix<cdouble>;
using SpMat = Eigen::SparseMatrix<double>;

/// Default boundary mismatch factor and speed of light (mm/ns).
inline constexpr double kDefaultZeta = 1.0;
inline constexpr double kDefaultC = 214.3;

/// Per-element P1 geometry shared by assembly and the batched Jacobian.
struct ElementData {
  double area = 0.0;
  Eigen::Matrix3d stiffness;  // integral of grad u_l . grad u_m
};

/// Frequency-domain diffusion system
///   K = S + i omega B + sum_k (D_k K^D_k + c mu_k K^mu_k)
/// with exact P1 integrals. S = (c / 2 zeta) * boundary mass.
struct SystemMatrix {
  SpMatC k_matrix;
  SpMat mass;           // B_lm = int u_l u_m
  SpMat boundary_mass;  // int over the boundary of u_l u_m
  SpMat surface;        // S
  std::vector<SpMat> deriv_mu;  // K^mu_k = int u_k u_l u_m
  std::vector<SpMat> deriv_d;   // K^D_k = int u_k grad u_l . grad u_m
  std::vector<ElementData> elements;
  std::vector<std::array<int, 3>> triangles;
  double omega = 0.0;
  double zeta = kDefaultZeta;
  double c = kDefaultC;
  int n = 0;

  /// Reassembles k_matrix from the stored pieces for new parameters.
  SpMatC compose(const ParamField& params) const;
};

/// Assembles the system. With `with_derivatives` false the per-node
/// derivative blocks are left empty (faster for pure forward runs).
SystemMatrix assemble_system(const Mesh& mesh, const ParamField& params, double omega,
                             double zeta = kDefaultZeta, bool with_derivatives = true);

/// Optical sources and detectors as nodal boundary profiles.
/// Profiles are non-negative, vanish off the boundary and sum to one.
struct SourceDetectorLayout {
  std::vector<Eigen::VectorXd> sources;
  std::vector<Eigen::VectorXd> detectors;

  int n_sources() const { return static_cast<int>(sources.size()); }
  int n_detectors() const { return static_cast<int>(detectors.size()); }
  void validate(const Mesh& mesh) const;
};

/// Hat-shaped boundary profile centred at polar angle `angle` with angular
/// half width `half_width` (radians, measured about the origin).
Eigen::VectorXd boundary_profile(const Mesh& mesh, double angle, double half_width);

/// Equally spaced sources starting at angle `offset`; detectors interleaved
/// halfway between sources when counts are equal.
SourceDetectorLayout ring_layout(const Mesh& mesh, int n_sources, int n_detectors,
                                 double half_width, double offset = 0.0);

/// Sparse LU factorization of K, reused for many right-hand sides.
class ForwardFactor {
 public:
  explicit ForwardFactor(const SpMatC& k);
  ~ForwardFactor();
  ForwardFactor(ForwardFactor&&) noexcept;
  ForwardFactor& operator=(ForwardFactor&&) noexcept;
  Eigen::MatrixXcd solve(const Eigen::MatrixXcd& rhs) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Robin loads q_s = B_boundary J_s / (2 zeta), one column per source.
/// Profile weights divided by the lumped boundary mass: a boundary density
/// whose integral equals the weight sum, independent of the mesh spacing.
Eigen::VectorXd profile_density(const SystemMatrix& sys, const Eigen::VectorXd& profile);

Eigen::MatrixXcd load_vectors(const SystemMatrix& sys, const SourceDetectorLayout& layout);

/// Measurement functional rows (c / 2 zeta) (B_boundary w_m)^T.
Eigen::MatrixXd measurement_matrix(const SystemMatrix& sys, const SourceDetectorLayout& layout);

/// Nodal fields, one column per source. Throws singular-system.
Eigen::MatrixXcd solve_forward(const SystemMatrix& sys, const SourceDetectorLayout& layout);
Eigen::MatrixXcd solve_forward(const SystemMatrix& sys, const ForwardFactor& factor,
                               const SourceDetectorLayout& layout);

/// Outgoing current <w_m, (c U_s - J_s) / (2 zeta)>, detectors x sources.
Eigen::MatrixXcd measure_boundary(const SystemMatrix& sys, const SourceDetectorLayout& layout,
                                  const Eigen::MatrixXcd& fields);

/// Full simulation: assemble, factor, solve, measure.
Eigen::MatrixXcd forward_map(const Mesh& mesh, const ParamField& params,
                             const SourceDetectorLayout& layout, double omega,
                             double zeta = kDefaultZeta);

/// Detector-major flattening: entry (m, s) goes to m * n_sources + s.
Eigen::VectorXcd flatten_data(const Eigen::MatrixXcd& data);
Eigen::MatrixXcd unflatten_data(const Eigen::VectorXcd& flat, int n_detectors, int n_sources);

void write_data(const Eigen::MatrixXcd& data, const std::string& path);
Eigen::MatrixXcd read_data(const std::string& path);

}  // namespace difftomo
