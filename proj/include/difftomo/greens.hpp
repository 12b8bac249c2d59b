#pragma once

#include <complex>

#include <Eigen/Core>

namespace difftomo {

using cdouble = std::complex<double>;

/// Background medium for the analytic Green's functions.
struct Background {
  double mu_a = 0.01;
  double d0 = 1.0 / 3.0;
  double c = 1.0;
  double omega = 0.0;
  double l_ext = 0.0;  // extrapolation length for half-space and slab models
};

/// k = sqrt((c mu_a + i omega) / d0), principal branch.
cdouble diffuse_wavenumber(double mu_a, double d0, double c, double omega);
cdouble diffuse_wavenumber(const Background& bg);

/// Infinite-medium kernel exp(-k r) / (4 pi d0 r).
cdouble greens_infinite(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime, cdouble k,
                        double d0);

/// Gradient of greens_infinite with respect to r.
Eigen::Vector3cd greens_infinite_gradient(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime,
                                          cdouble k, double d0);

/// Hessian with respect to r of greens_infinite (symmetric 3x3).
Eigen::Matrix3cd greens_infinite_hessian(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime,
                                         cdouble k, double d0);

/// Transverse plane-wave mode of the half-space (z <= 0 medium convention
/// uses z, z' >= 0 as depths) with a Robin boundary of extrapolation length
/// l_ext: (l / d0) exp(-Q |z - z'|) / (Q l + 1), Q = sqrt(q^2 + k^2).
/// One argument must lie on the boundary plane (z = 0 or z' = 0).
cdouble halfspace_mode(double q, double z, double z_prime, cdouble k, double l_ext, double d0);

/// Decay constant Q = sqrt(q^2 + k^2) with the principal branch.
cdouble mode_decay(double q, cdouble k);

/// One-dimensional half-line kernel on x, y >= 0 with a Robin end at 0.
double greens_1d(double x, double y, double k, double l_ext, double d);

}  // namespace difftomo
