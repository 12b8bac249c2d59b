#include <cmath>
#include <numbers>

#include "difftomo/greens.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace difftomo;
constexpr double kPi = std::numbers::pi;

TEST_CASE("diffuse wavenumber") {
  const cdouble k = diffuse_wavenumber(0.01, 1.0 / 3.0, 1.0, 0.0);
  CHECK(k.real() == doctest::Approx(0.173205).epsilon(1e-6));
  CHECK(k.imag() == 0.0);
  const cdouble kw = diffuse_wavenumber(0.0, 0.5, 1.0, 2.0);
  CHECK(std::arg(kw) == doctest::Approx(kPi / 4));
  CHECK(kw.real() > 0.0);
  CHECK_ERROR_KIND(diffuse_wavenumber(0.01, 0.0, 1.0, 0.0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(diffuse_wavenumber(0.01, -1.0, 1.0, 0.0), ErrorKind::InvalidArgument);
}

TEST_CASE("infinite-medium kernel") {
  const Eigen::Vector3d o(0, 0, 0), e(1, 0, 0);
  CHECK(std::abs(greens_infinite(e, o, 0.0, 1.0 / (4 * kPi)) - 1.0) < 1e-15);
  CHECK_ERROR_KIND(greens_infinite(o, o, 1.0, 1.0), ErrorKind::SingularEvaluation);
  CHECK_ERROR_KIND(greens_infinite_gradient(o, o, 1.0, 1.0), ErrorKind::SingularEvaluation);

  // (laplacian - k^2) G = 0 away from the source
  const cdouble k = diffuse_wavenumber(0.02, 0.3, 1.0, 0.4);
  const double h = 1e-3;
  for (const Eigen::Vector3d r : {Eigen::Vector3d(0.7, 0.2, -0.3), Eigen::Vector3d(2.0, 1.0, 0.5)}) {
    const cdouble g = greens_infinite(r, o, k, 0.3);
    cdouble lap = -6.0 * g;
    for (int a = 0; a < 3; ++a) {
      Eigen::Vector3d d = Eigen::Vector3d::Zero();
      d[a] = h;
      lap += greens_infinite(r + d, o, k, 0.3) + greens_infinite(r - d, o, k, 0.3);
    }
    lap /= h * h;
    CHECK(std::abs(lap - k * k * g) / std::abs(g) < 1e-4);

    // analytic derivatives against central differences
    const Eigen::Vector3cd grad = greens_infinite_gradient(r, o, k, 0.3);
    const Eigen::Matrix3cd hess = greens_infinite_hessian(r, o, k, 0.3);
    for (int a = 0; a < 3; ++a) {
      Eigen::Vector3d d = Eigen::Vector3d::Zero();
      d[a] = 1e-5;
      const cdouble fd = (greens_infinite(r + d, o, k, 0.3) - greens_infinite(r - d, o, k, 0.3)) / 2e-5;
      CHECK(std::abs(fd - grad[a]) < 1e-7 * grad.norm());
      const Eigen::Vector3cd gfd =
          (greens_infinite_gradient(r + d, o, k, 0.3) - greens_infinite_gradient(r - d, o, k, 0.3)) / 2e-5;
      CHECK((gfd - hess.col(a)).norm() < 1e-6 * hess.norm());
    }
  }
}

TEST_CASE("half-space mode basics") {
  const cdouble k(0.8, 0.1);
  CHECK_ERROR_KIND(halfspace_mode(0.5, 1.0, 2.0, k, 0.3, 0.5), ErrorKind::DomainViolation);
  CHECK_ERROR_KIND(halfspace_mode(0.5, -1.0, 0.0, k, 0.3, 0.5), ErrorKind::DomainViolation);
  const cdouble Q = std::sqrt(0.25 + k * k);
  const cdouble expect = (0.3 / 0.5) * std::exp(-Q * 2.0) / (Q * 0.3 + 1.0);
  CHECK(std::abs(halfspace_mode(0.5, 0.0, 2.0, k, 0.3, 0.5) - expect) < 1e-15);
  CHECK(halfspace_mode(0.5, 2.0, 0.0, k, 0.3, 0.5) == halfspace_mode(0.5, 0.0, 2.0, k, 0.3, 0.5));
  CHECK(std::abs(halfspace_mode(0.0, 0.0, 1.0, 0.0, 0.3, 0.5) - 0.6) < 1e-15);
}


TEST_CASE("half-space mode matches a lattice transform of the image expansion") {
  const double k = 1.0, l = 0.5, d0 = 1.0 / 3.0, depth = 5.0, a = 1.0;
  const int half = 28;
  std::vector<double> g((2 * half + 1) * (2 * half + 1));
  for (int i = -half; i <= half; ++i)
    for (int j = -half; j <= half; ++j)
      g[(i + half) * (2 * half + 1) + (j + half)] = oracle::halfspace_green(a * std::hypot(i, j), depth, k, l, d0);
  const int n = 8;
  // Nyquist rows alias onto themselves, so the pointwise comparison uses
  // the open Brillouin zone; the full grid is compared against the peak.
  double worst = 0.0, worst_peak = 0.0;
  const double peak = std::abs(halfspace_mode(0.0, 0.0, depth, k, l, d0));
  for (int mx = 0; mx < n; ++mx)
    for (int my = 0; my < n; ++my) {
      const double qx = 2 * kPi * (mx < n / 2 ? mx : mx - n) / (n * a);
      const double qy = 2 * kPi * (my < n / 2 ? my : my - n) / (n * a);
      cdouble sum = 0.0;
      for (int i = -half; i <= half; ++i)
        for (int j = -half; j <= half; ++j)
          sum += g[(i + half) * (2 * half + 1) + (j + half)] *
                 std::exp(cdouble(0, -(qx * i + qy * j) * a)) * (a * a);
      const cdouble ref = halfspace_mode(std::hypot(qx, qy), 0.0, depth, k, l, d0);
      worst_peak = std::max(worst_peak, std::abs(sum - ref) / peak);
      if (mx != n / 2 && my != n / 2) worst = std::max(worst, std::abs(sum - ref) / std::abs(ref));
    }
  MESSAGE("worst relative deviation " << worst << ", peak-normalised " << worst_peak);
  CHECK(worst < 0.01);
  CHECK(worst_peak < 0.01);
}

TEST_CASE("one-dimensional kernel") {
  const double k = 0.7, l = 0.4, d = 0.3;
  CHECK(greens_1d(0, 0, k, l, d) == doctest::Approx(1.0 / (d * k * (1 + k * l))).epsilon(1e-14));
  CHECK(greens_1d(0.3, 1.1, k, l, d) == greens_1d(1.1, 0.3, k, l, d));
  CHECK_ERROR_KIND(greens_1d(0, 0, 0.0, l, d), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(greens_1d(0, 0, -1.0, l, d), ErrorKind::InvalidArgument);
  // away from the source it solves u'' = k^2 u
  const double h = 1e-4, x = 0.9, y = 0.2;
  const double u2 = (greens_1d(x + h, y, k, l, d) - 2 * greens_1d(x, y, k, l, d) + greens_1d(x - h, y, k, l, d)) / (h * h);
  CHECK(u2 == doctest::Approx(k * k * greens_1d(x, y, k, l, d)).epsilon(1e-5));
}
