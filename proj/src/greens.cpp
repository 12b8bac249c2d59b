#include "difftomo/greens.hpp"

#include <cmath>
#include <numbers>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {
constexpr double kPi = std::numbers::pi;

double separation(const Eigen::Vector3d& r, const Eigen::Vector3d& rp) {
  const double d = (r - rp).norm();
  require(d > 0.0, ErrorKind::SingularEvaluation, "Green's function evaluated at coincident points");
  return d;
}
}  // namespace

cdouble diffuse_wavenumber(double mu_a, double d0, double c, double omega) {
  require(d0 > 0.0, ErrorKind::InvalidArgument, "d0 must be positive");
  require(mu_a >= 0.0 && c > 0.0, ErrorKind::InvalidArgument, "mu_a and c must be admissible");
  return std::sqrt(cdouble(c * mu_a, omega) / d0);
}

cdouble diffuse_wavenumber(const Background& bg) {
  return diffuse_wavenumber(bg.mu_a, bg.d0, bg.c, bg.omega);
}

cdouble greens_infinite(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime, cdouble k,
                        double d0) {
  const double R = separation(r, r_prime);
  return std::exp(-k * R) / (4.0 * kPi * d0 * R);
}

Eigen::Vector3cd greens_infinite_gradient(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime,
                                          cdouble k, double d0) {
  const double R = separation(r, r_prime);
  const cdouble g = std::exp(-k * R) / (4.0 * kPi * d0 * R);
  const cdouble dg = -g * (k + 1.0 / R);
  const Eigen::Vector3d u = (r - r_prime) / R;
  return dg * u.cast<cdouble>();
}

Eigen::Matrix3cd greens_infinite_hessian(const Eigen::Vector3d& r, const Eigen::Vector3d& r_prime,
                                         cdouble k, double d0) {
  const double R = separation(r, r_prime);
  const cdouble g = std::exp(-k * R) / (4.0 * kPi * d0 * R);
  const cdouble f1 = -g * (k + 1.0 / R);
  const cdouble f2 = g * ((k + 1.0 / R) * (k + 1.0 / R) + 1.0 / (R * R));
  const Eigen::Vector3d u = (r - r_prime) / R;
  const Eigen::Matrix3d uu = u * u.transpose();
  return f2 * uu.cast<cdouble>() + (f1 / R) * (Eigen::Matrix3d::Identity() - uu).cast<cdouble>();
}

cdouble mode_decay(double q, cdouble k) {
  const cdouble q2 = q * q + k * k;
  return std::sqrt(q2);
}

cdouble halfspace_mode(double q, double z, double z_prime, cdouble k, double l_ext, double d0) {
  require(d0 > 0.0, ErrorKind::InvalidArgument, "d0 must be positive");
  require(l_ext >= 0.0, ErrorKind::InvalidArgument, "extrapolation length must be non-negative");
  require(z >= 0.0 && z_prime >= 0.0, ErrorKind::DomainViolation, "depths must be non-negative");
  require(z == 0.0 || z_prime == 0.0, ErrorKind::DomainViolation,
          "one argument must lie on the boundary plane");
  const cdouble q2 = q * q + k * k;
  const cdouble Q = std::abs(q2) < 1e-30 ? k : std::sqrt(q2);
  return (l_ext / d0) * std::exp(-Q * std::abs(z - z_prime)) / (Q * l_ext + 1.0);
}

double greens_1d(double x, double y, double k, double l_ext, double d) {
  require(k > 0.0, ErrorKind::InvalidArgument, "k must be positive");
  require(d > 0.0 && l_ext >= 0.0, ErrorKind::InvalidArgument, "d and l_ext must be admissible");
  require(x >= 0.0 && y >= 0.0, ErrorKind::DomainViolation, "arguments must lie on the half-line");
  const double refl = (1.0 - k * l_ext) / (1.0 + k * l_ext);
  return (std::exp(-k * std::abs(x - y)) + refl * std::exp(-k * (x + y))) / (2.0 * d * k);
}

}  // namespace difftomo
