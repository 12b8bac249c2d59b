#pragma once

#include <cmath>

// Independent reference computations shared by unit and acceptance tests.
namespace oracle {

constexpr double kPi = 3.14159265358979323846;

// Half-space Green's function with a Robin boundary of extrapolation length l,
// source on the boundary plane, field point at transverse distance rho and
// depth z. Image expansion: twice the free kernel minus an exponentially
// weighted line of images behind the boundary.
inline double halfspace_green(double rho, double depth, double k, double l, double d0) {
  auto ginf = [&](double r) { return std::exp(-k * r) / (4 * kPi * d0 * r); };
  const double direct = 2.0 * ginf(std::hypot(rho, depth));
  // integral_0^inf exp(-t) f(l t) dt, composite Simpson on [0, 45]
  const int n = 3000;
  const double T = 45.0, dt = T / n;
  double line = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = i * dt;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    line += w * std::exp(-t) * ginf(std::hypot(rho, depth + l * t));
  }
  line *= dt / 3.0;
  return direct - 2.0 * line;
}

}  // namespace oracle

namespace oracle {

// sup over centres r in B_a of k^2 ||G_0(r, .)||_{L2(B_a)} with G_0 = exp(-k|r|) / (4 pi |r|),
// by composite Simpson in spherical coordinates about r for several offsets.
inline double mu_sup_quadrature(double k, double a) {
  auto simpson = [](auto f, double lo, double hi, int n) {
    const double h = (hi - lo) / n;
    double s = f(lo) + f(hi);
    for (int i = 1; i < n; ++i) s += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
  };
  double best = 0.0;
  for (int step = 0; step <= 8; ++step) {
    const double d = a * step / 10.0;
    auto angular = [&](double g) {
      const double rmax = -d * std::cos(g) + std::sqrt(a * a - d * d * std::sin(g) * std::sin(g));
      const double radial =
          simpson([&](double r) { return std::exp(-2 * k * r) / (16 * kPi * kPi); }, 0.0, rmax, 200);
      return 2 * kPi * std::sin(g) * radial;
    };
    best = std::max(best, k * k * std::sqrt(simpson(angular, 0.0, kPi, 400)));
  }
  return best;
}

}  // namespace oracle
