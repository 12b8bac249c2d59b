#include <cmath>

#include "difftomo/broken_ray.hpp"
#include "difftomo/error.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Slab {
  SlabGrid grid;
  BrokenRayGeometry geom;
};

Slab make_slab(int n) {
  Slab s;
  s.geom.width = 1.0;
  s.geom.theta = kPi / 6;
  s.grid.ny = n;
  s.grid.nz = n;
  s.grid.dy = s.geom.width / (n - 1);
  return s;
}

Eigen::MatrixXd two_region(const Slab& s) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Ones(s.grid.ny, s.grid.nz);
  const double dz = s.grid.dz(s.geom);
  for (int i = 0; i < s.grid.ny; ++i)
    for (int j = 0; j < s.grid.nz; ++j) {
      const double y = i * s.grid.dy, z = j * dz;
      if (std::hypot(y - 0.5, z - 0.5) < 0.25) f(i, j) = 2.0;
    }
  return f;
}

}  // namespace

TEST_CASE("forward path lengths") {
  const Slab s = make_slab(32);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(32, 32);
  CHECK(broken_ray_forward(zero, s.grid, s.geom, 0.3, 0.5) == 0.0);
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(32, 32, 1.7);
  const double t = std::tan(s.geom.theta);
  for (double zr : {0.0, 0.25, 0.6, 1.0}) {
    const double y1 = 0.2, y2 = y1 + (1.0 - zr) * t;
    CHECK(broken_ray_forward(c, s.grid, s.geom, y1, y2) ==
          doctest::Approx(1.7 * (zr + (1.0 - zr) / std::cos(s.geom.theta))).epsilon(1e-12));
  }
  CHECK_ERROR_KIND(broken_ray_forward(c, s.grid, s.geom, 0.2, 0.1), ErrorKind::InvalidGeometry);
  CHECK_ERROR_KIND(broken_ray_forward(c, s.grid, s.geom, 0.2, 0.2 + 2 * t), ErrorKind::InvalidGeometry);
  BrokenRayGeometry bad = s.geom;
  bad.theta = kPi / 2;
  CHECK_ERROR_KIND(broken_ray_forward(c, s.grid, bad, 0.2, 0.3), ErrorKind::InvalidGeometry);

  // support away from the path
  Eigen::MatrixXd spot = Eigen::MatrixXd::Zero(32, 32);
  spot(25, 3) = 1.0;
  CHECK(std::abs(broken_ray_forward(spot, s.grid, s.geom, 0.1, 0.1 + 0.5 * t)) < 1e-14);

  // linearity
  const Eigen::MatrixXd f = two_region(s);
  CHECK(broken_ray_forward(f + 2.0 * c, s.grid, s.geom, 0.4, 0.7) ==
        doctest::Approx(broken_ray_forward(f, s.grid, s.geom, 0.4, 0.7) +
                        2.0 * broken_ray_forward(c, s.grid, s.geom, 0.4, 0.7)));
}

TEST_CASE("inversion basics") {
  const Slab s = make_slab(32);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(32, 32);
  CHECK(broken_ray_invert(zero, s.grid, s.geom, 0.0).cwiseAbs().maxCoeff() == 0.0);
  CHECK_ERROR_KIND(broken_ray_invert(zero, s.grid, s.geom, -1.0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(broken_ray_invert(Eigen::MatrixXd::Zero(4, 4), s.grid, s.geom, 0.0), ErrorKind::InvalidData);
  const Eigen::MatrixXd data = broken_ray_measure(two_region(s), s.grid, s.geom);
  const Eigen::MatrixXd a = broken_ray_invert(data, s.grid, s.geom, 1e-4);
  const Eigen::MatrixXd b = broken_ray_invert(3.0 * data, s.grid, s.geom, 1e-4);
  CHECK((b - 3.0 * a).norm() < 1e-12 * a.norm());
}

TEST_CASE("constant phantom round trip") {
  const Slab s = make_slab(128);
  const double scale = broken_ray_calibrate(s.grid, s.geom, 0.0);
  MESSAGE("calibration scale " << scale);
  CHECK(scale == doctest::Approx(1.0).epsilon(0.02));
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(128, 128);
  const Eigen::MatrixXd rec = broken_ray_invert(broken_ray_measure(one, s.grid, s.geom), s.grid, s.geom, 0.0, scale);
  CHECK((rec.middleCols(13, 102).array() - 1.0).abs().maxCoeff() < 0.02);
}

TEST_CASE("two-region phantom") {
  const Slab s = make_slab(64);
  const Eigen::MatrixXd f = two_region(s);
  const Eigen::MatrixXd data = broken_ray_measure(f, s.grid, s.geom, 8);
  CHECK(data.rows() == 64 * 8);
  CHECK(data.cols() == 63 * 8 + 1);
  const double scale = broken_ray_calibrate(s.grid, s.geom, 0.0);
  double best = 1e300;
  for (double alpha : {0.0, 1e-6, 1e-5, 1e-4, 1e-3}) {
    const Eigen::MatrixXd rec = broken_ray_invert(data, s.grid, s.geom, alpha, scale);
    const double err = (rec - f).norm() / f.norm();
    MESSAGE("alpha " << alpha << " relative error " << err);
    best = std::min(best, err);
  }
  CHECK(best < 0.05);
  CHECK_ERROR_KIND(broken_ray_measure(f, s.grid, s.geom, 0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(broken_ray_invert(data.topRows(64), s.grid, s.geom, 0.0), ErrorKind::InvalidData);
}

TEST_CASE("smooth phantom without oversampling") {
  const Slab s = make_slab(128);
  Eigen::MatrixXd f(128, 128);
  const double dz = s.grid.dz(s.geom);
  for (int i = 0; i < 128; ++i)
    for (int j = 0; j < 128; ++j)
      f(i, j) = 1.0 + std::exp(-(std::pow((i * s.grid.dy - 0.5) / 0.1, 2) + std::pow((j * dz - 0.5) / 0.1, 2)));
  const Eigen::MatrixXd rec = broken_ray_invert(broken_ray_measure(f, s.grid, s.geom), s.grid, s.geom, 0.0);
  CHECK((rec - f).norm() / f.norm() < 0.01);
}
