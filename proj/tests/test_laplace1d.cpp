#include <cmath>

#include "difftomo/laplace1d.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Relative L2 error on [lo, hi] with the log-grid measure dx = x dt.
double window_error(const LaplaceReconstruction& r, double lo, double hi, double (*truth)(double)) {
  double num = 0.0, den = 0.0;
  for (int i = 0; i < r.x.size(); ++i) {
    if (r.x[i] < lo || r.x[i] > hi) continue;
    const double t = truth(r.x[i]);
    num += r.x[i] * (r.eta[i] - t) * (r.eta[i] - t);
    den += r.x[i] * t * t;
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("singular values of the Laplace transform") {
  for (double s : {0.0, 0.3, 1.0, 2.5, 6.0}) {
    const double mod2 = std::norm(laplace_singular_value(s));
    CHECK(mod2 == doctest::Approx(laplace_sigma_sq(s)).epsilon(1e-12));
  }
  CHECK(laplace_sigma_sq(0.0) == doctest::Approx(kPi));
  CHECK(std::abs(laplace_singular_value(0.0) - std::sqrt(kPi)) < 1e-13);
  const LogGrid g = LogGrid::span(std::exp(-40.0), std::exp(40.0), 4001);
  CHECK(std::abs(laplace_sigma_sq_quadrature(0.0, g) - kPi) < 1e-6);
  const std::complex<double> q = laplace_sigma_sq_quadrature(0.7, g);
  // int y^{a}/(1+y) dy = pi / sin((a+1) pi) with a = -1/2 + i s
  const std::complex<double> ref = kPi / std::sin((std::complex<double>(0.5, 0.7)) * kPi);
  CHECK(std::abs(q - ref) < 1e-6);
}

TEST_CASE("log grid validation") {
  CHECK_ERROR_KIND(LogGrid::from_samples(Eigen::VectorXd()), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(LogGrid::from_samples(Eigen::Vector3d(1.0, 2.0, 3.0)), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(LogGrid::from_samples(Eigen::Vector3d(1.0, 0.5, 0.25)), ErrorKind::InvalidArgument);
  const LogGrid g = LogGrid::from_samples(Eigen::Vector3d(1.0, 2.0, 4.0));
  CHECK(g.dt == doctest::Approx(std::log(2.0)));
  CHECK_ERROR_KIND(laplace_invert_1d(Eigen::VectorXd(), Eigen::VectorXd(), LaplaceFilter{}),
                   ErrorKind::InvalidArgument);
}

TEST_CASE("exponential recovered from its Laplace transform") {
  const LogGrid kg = LogGrid::span(std::exp(-30.0), std::exp(30.0), 1024);
  const Eigen::VectorXd k = kg.points();
  const Eigen::VectorXd phi = (k.array() + 1.0).inverse();
  LaplaceFilter f;
  f.alpha = 1e-3;
  const LaplaceReconstruction r = laplace_invert_1d(k, phi, f);
  const double err = window_error(r, 0.1, 3.0, [](double x) { return std::exp(-x); });
  MESSAGE("relative L2 error on [0.1, 3]: " << err);
  CHECK(err < 0.10);

  // weaker regularization resolves more of the spectrum
  f.alpha = 1e-6;
  const double err_weak = window_error(laplace_invert_1d(k, phi, f), 0.1, 3.0, [](double x) { return std::exp(-x); });
  CHECK(err_weak < err);

  const LaplaceReconstruction z = laplace_invert_1d(k, Eigen::VectorXd::Zero(k.size()), f);
  CHECK(z.eta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unfiltered inversion is a projection on band-limited images") {
  const LogGrid g = LogGrid::span(std::exp(-16.0), std::exp(16.0), 64);
  // band-limited image: a smooth bump in log-space
  Eigen::VectorXd eta(g.n);
  const Eigen::VectorXd x = g.points();
  for (int i = 0; i < g.n; ++i) {
    const double u = std::log(x[i]);
    eta[i] = std::exp(-0.5 * u) * std::exp(-u * u / 8.0);
  }
  LaplaceFilter none;
  none.kind = LaplaceFilter::Kind::None;
  const Eigen::VectorXd once = laplace_invert_1d(g.points(), laplace_forward_1d(g, eta, g), none, g.t0).eta;
  const Eigen::VectorXd twice = laplace_invert_1d(g.points(), laplace_forward_1d(g, once, g), none, g.t0).eta;
  CHECK((twice - once).norm() <= 1e-8 * once.norm());
  CHECK((once - eta).norm() <= 1e-6 * eta.norm());

  // the spectral forward map agrees with direct quadrature of the transform
  const Eigen::VectorXd phi = laplace_forward_1d(g, eta, g);
  for (int j : {20, 32, 40}) {
    const double kj = x[j];
    double direct = 0.0;
    for (int i = 0; i < g.n; ++i) direct += std::exp(-kj * x[i]) * eta[i] * x[i] * g.dt;
    CHECK(phi[j] == doctest::Approx(direct).epsilon(1e-3));
  }
}
