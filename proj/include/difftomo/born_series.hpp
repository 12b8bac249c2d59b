#pragma once

#include <vector>

#include <Eigen/Core>

#include "difftomo/linearize.hpp"

namespace difftomo {

/// Point sources and detectors around a cubic-voxel reconstruction region.
/// The perturbation eta = c delta mu_a is piecewise constant on voxels of
/// edge voxel_size centred at the given points.
struct BornGrid {
  std::vector<Point3> sources;
  std::vector<Point3> detectors;
  std::vector<Point3> voxels;
  double voxel_size = 1.0;

  void validate() const;
  static BornGrid cube(int per_side, double voxel_size, const Point3& centre);
};

/// Discretized absorption-only Born operators. Data are ns x nd matrices,
/// flattened source-major when a vector is needed.
class BornOperator {
 public:
  /// truncation: singular values below truncation * sigma_max are dropped in K1^+.
  BornOperator(const BornKernels& kernels, const BornGrid& grid, double truncation = 1e-3);

  int sources() const { return int(a_.rows()); }
  int detectors() const { return int(b_.cols()); }
  int voxels() const { return int(a_.cols()); }
  int rank() const { return rank_; }
  double truncation() const { return truncation_; }

  /// Source-to-voxel, voxel-to-detector and volume-integrated voxel-to-voxel kernels.
  const Eigen::MatrixXcd& source_kernel() const { return a_; }
  const Eigen::MatrixXcd& detector_kernel() const { return b_; }
  const Eigen::MatrixXcd& volume_kernel() const { return t_; }
  /// K1 as a (ns nd) x nv matrix.
  const Eigen::MatrixXcd& k1_matrix() const { return k1_; }

  Eigen::MatrixXcd apply_k1(const Eigen::VectorXcd& eta) const;
  Eigen::MatrixXcd apply_k2(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) const;
  Eigen::MatrixXcd apply_k3(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b, const Eigen::VectorXcd& c) const;
  /// Truncated-SVD pseudoinverse applied to data.
  Eigen::VectorXcd apply_pinv(const Eigen::MatrixXcd& data) const;

  /// Scattering data from the discrete Lippmann-Schwinger equation, all orders.
  Eigen::MatrixXcd exact_data(const Eigen::VectorXcd& eta) const;

 private:
  Eigen::MatrixXcd a_, b_, t_, k1_;
  Eigen::MatrixXcd pinv_;
  double volume_ = 1.0;
  double truncation_ = 1e-3;
  int rank_ = 0;
};

struct SeriesState {
  int order = 0;
  /// partial_sums[j] = sum of the first j + 1 terms.
  std::vector<Eigen::VectorXcd> partial_sums;
  std::vector<Eigen::VectorXcd> terms;
  int rank = 0;
  double truncation = 0.0;
};

/// Inverse Born series to the given order (1..3).
SeriesState inverse_born_series(const Eigen::MatrixXcd& data, const BornOperator& op, int order);

struct ConvergenceConstants {
  double mu = 0.0;
  double nu = 0.0;
  double radius = 0.0;
  double k = 0.0;
  double a = 0.0;
  double boundary_distance = 0.0;
  double boundary_area = 0.0;
};

/// Bounds for a ball of radius a at distance boundary_distance from a
/// boundary of the given area (distance may be +infinity).
ConvergenceConstants convergence_radius(double k, double a, double boundary_distance, double boundary_area);

}  // namespace difftomo
