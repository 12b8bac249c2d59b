#pragma once

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace difftomo {

/// Filter R(1/sigma) applied to the singular spectrum of the Laplace transform.
struct LaplaceFilter {
  enum class Kind { None, Tikhonov, Truncation } kind = Kind::Tikhonov;
  double alpha = 1e-3;

  /// R(1/sigma) for a singular value sigma > 0.
  double apply(double sigma) const;
};

/// Samples on a uniform logarithmic grid x_j = exp(t0 + j dt).
struct LogGrid {
  double t0 = 0.0;
  double dt = 0.0;
  int n = 0;

  static LogGrid from_samples(const Eigen::VectorXd& x);
  static LogGrid span(double x_min, double x_max, int n);
  Eigen::VectorXd points() const;
  /// Mellin frequencies paired with this grid, s_m = 2 pi m / (n dt), m in [-n/2, n/2).
  Eigen::VectorXd frequencies() const;
};

/// Gamma(1/2 + i s); its squared modulus is pi / cosh(pi s).
std::complex<double> laplace_singular_value(double s);
/// pi / cosh(pi s).
double laplace_sigma_sq(double s);
/// Trapezoid evaluation of int_0^inf y^(-1/2 + i s) / (1 + y) dy on a log grid.
std::complex<double> laplace_sigma_sq_quadrature(double s, const LogGrid& grid);

struct LaplaceReconstruction {
  Eigen::VectorXd x;
  Eigen::VectorXd eta;
};

/// Regularized inverse of Phi(k) = int_0^inf exp(-k x) eta(x) dx through the
/// Mellin diagonalization. k must be log-spaced; the image lives on the same
/// log-spacing starting at x_t0 (defaults to the k grid itself).
LaplaceReconstruction laplace_invert_1d(const Eigen::VectorXd& k, const Eigen::VectorXd& phi,
                                        const LaplaceFilter& filter);
LaplaceReconstruction laplace_invert_1d(const Eigen::VectorXd& k, const Eigen::VectorXd& phi,
                                        const LaplaceFilter& filter, double x_t0);

/// Spectral forward map for an image sampled on a log grid: the Laplace
/// transform restricted to the Mellin band of the grid, sampled on k.
Eigen::VectorXd laplace_forward_1d(const LogGrid& x_grid, const Eigen::VectorXd& eta, const LogGrid& k_grid);

}  // namespace difftomo
