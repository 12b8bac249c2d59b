#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

#include "difftomo/greens.hpp"

namespace difftomo {

/// Square source/detector lattice on the plane z = 0 and the depth samples of
/// the reconstruction. Sources, detectors and image share the n x n lattice.
struct HalfSpaceGrid {
  int n = 0;
  double spacing = 1.0;
  Eigen::VectorXd z;

  void validate() const;
};

/// Scattering data Phi_s(rho_1, rho_2) on the lattice, indexed
/// ((i1 n + j1) n + i2) n + j2 with rho = spacing (i, j).
struct LatticeData {
  int n = 0;
  std::vector<std::complex<double>> values;

  static LatticeData zeros(int n);
  std::complex<double>& at(int i1, int j1, int i2, int j2);
  std::complex<double> at(int i1, int j1, int i2, int j2) const;
};

struct HalfSpaceOptions {
  /// Tikhonov weight, relative to the largest diagonal entry of the
  /// zero-frequency absorption normal matrix.
  double alpha = 1e-4;
  bool absorption_only = false;
  /// Normal solves the small depth-space system; DataSpace inverts M + alpha I
  /// over the p grid. Both give the same minimum-norm regularized solution.
  enum class Form { Normal, DataSpace } form = Form::Normal;
  /// p rows with max_z |kappa_A| below this (relative) are dropped.
  double p_cutoff = 1e-12;
};

/// Reconstruction on the lattice x depth samples, indexed (iz n + i) n + j.
struct HalfSpaceImage {
  int n = 0;
  Eigen::VectorXd z;
  std::vector<double> mu_a;
  std::vector<double> diff;

  double mu_a_at(int iz, int i, int j) const { return mu_a[(std::size_t(iz) * n + i) * n + j]; }
  double diff_at(int iz, int i, int j) const { return diff[(std::size_t(iz) * n + i) * n + j]; }
};

/// Absorption and diffusion kernels for wavevectors q1, q2 at depth z, with
/// data normalized by the boundary factors of both mode functions.
std::complex<double> kappa_absorption(const Eigen::Vector2d& q1, const Eigen::Vector2d& q2, double z,
                                      std::complex<double> k, double c);
std::complex<double> kappa_diffusion(const Eigen::Vector2d& q1, const Eigen::Vector2d& q2, double z,
                                     std::complex<double> k);

/// Direct Fourier-Laplace inversion of lattice data in the half-space z >= 0.
HalfSpaceImage fl_halfspace_invert(const LatticeData& data, const HalfSpaceGrid& grid, const Background& bg,
                                   const HalfSpaceOptions& opts);

}  // namespace difftomo
