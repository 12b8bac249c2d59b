#include <cmath>

#include <Eigen/SVD>

#include "difftomo/born_series.hpp"
#include "difftomo/error.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace difftomo;

namespace {

// points on a sphere, golden-angle spiral
std::vector<Point3> sphere_points(int n, double radius, double twist) {
  std::vector<Point3> p;
  const double golden = 3.14159265358979323846 * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = golden * i + twist;
    p.push_back(radius * Point3(r * std::cos(phi), r * std::sin(phi), z));
  }
  return p;
}

struct Setup {
  BornKernels kernels;
  BornGrid grid;
};

// k = 1, background c mu_a = d0 k^2 = 1/3; 3 x 3 x 3 voxels inside a ring of 24 + 24 points
Setup unit_setup() {
  Background bg;
  bg.mu_a = 1.0 / 3.0;
  bg.d0 = 1.0 / 3.0;
  bg.c = 1.0;
  Setup s{born_kernels(bg), BornGrid::cube(3, 1.0, Point3::Zero())};
  s.grid.sources = sphere_points(24, 4.0, 0.0);
  s.grid.detectors = sphere_points(24, 4.0, 1.3);
  return s;
}

// centre voxel plus its six face neighbours
Eigen::VectorXcd ball_profile(const BornGrid& g, double value) {
  Eigen::VectorXcd eta = Eigen::VectorXcd::Zero(g.voxels.size());
  for (std::size_t v = 0; v < g.voxels.size(); ++v)
    if (g.voxels[v].norm() <= 1.0 + 1e-9) eta[v] = value;
  return eta;
}

double rel(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) { return (a - b).norm() / b.norm(); }

}  // namespace

TEST_CASE("order checks") {
  const Setup s = unit_setup();
  const BornOperator op(s.kernels, s.grid, 1e-6);
  const Eigen::MatrixXcd data = Eigen::MatrixXcd::Zero(24, 24);
  CHECK_ERROR_KIND(inverse_born_series(data, op, 4), ErrorKind::UnsupportedOrder);
  CHECK_ERROR_KIND(inverse_born_series(data, op, 0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(inverse_born_series(Eigen::MatrixXcd::Zero(3, 3), op, 1), ErrorKind::InvalidData);
  const SeriesState z = inverse_born_series(data, op, 3);
  CHECK(z.partial_sums.size() == 3);
  CHECK(z.partial_sums[2].norm() == 0.0);
  BornGrid bad = s.grid;
  bad.sources.push_back(Point3::Zero());
  CHECK_ERROR_KIND(BornOperator(s.kernels, bad), ErrorKind::InvalidGeometry);
}

TEST_CASE("Born expansion of the exact data") {
  const Setup s = unit_setup();
  const BornOperator op(s.kernels, s.grid, 1e-6);
  const Eigen::VectorXcd eta = ball_profile(s.grid, 0.02);
  const Eigen::MatrixXcd exact = op.exact_data(eta);
  const Eigen::MatrixXcd r1 = exact - op.apply_k1(eta);
  const Eigen::MatrixXcd r2 = r1 - op.apply_k2(eta, eta);
  const Eigen::MatrixXcd r3 = r2 - op.apply_k3(eta, eta, eta);
  CHECK(r2.norm() < 0.05 * r1.norm());
  CHECK(r3.norm() < 0.05 * r2.norm());
  // K1 matches the pointwise kernel times the voxel volume
  CHECK(std::abs(op.k1_matrix()(3 * 24 + 5, 13) - s.kernels.k1_1(s.grid.sources[3], s.grid.detectors[5],
                                                                  s.grid.voxels[13])) < 1e-15);
}

TEST_CASE("first term is the truncated pseudoinverse") {
  const Setup s = unit_setup();
  for (double tau : {1e-6, 1e-3, 1e-1}) {
    const BornOperator op(s.kernels, s.grid, tau);
    const Eigen::VectorXcd eta = ball_profile(s.grid, 0.1);
    const Eigen::MatrixXcd data = op.exact_data(eta);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(op.k1_matrix(), Eigen::ComputeThinU | Eigen::ComputeThinV);
    Eigen::VectorXcd flat(data.size());
    for (int i = 0; i < 24; ++i)
      for (int j = 0; j < 24; ++j) flat[i * 24 + j] = data(i, j);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(svd.singularValues().size());
    for (int i = 0; i < inv.size(); ++i)
      if (svd.singularValues()[i] > tau * svd.singularValues()[0]) inv[i] = 1.0 / svd.singularValues()[i];
    const Eigen::VectorXcd ref = svd.matrixV() * inv.asDiagonal() * svd.matrixU().adjoint() * flat;
    CHECK(rel(inverse_born_series(data, op, 1).partial_sums[0], ref) < 1e-8);
  }
}

TEST_CASE("linear data are inverted exactly") {
  const Setup s = unit_setup();
  const BornOperator op(s.kernels, s.grid, 1e-8);
  CHECK(op.rank() == 27);
  const Eigen::VectorXcd eta = ball_profile(s.grid, 0.3);
  const SeriesState st = inverse_born_series(op.apply_k1(eta), op, 1);
  CHECK(rel(st.partial_sums[0], eta) < 1e-6);
}

TEST_CASE("higher orders improve low-contrast reconstructions") {
  const Setup s = unit_setup();
  const BornOperator op(s.kernels, s.grid, 1e-8);
  const double background = 1.0 / 3.0;
  const Eigen::VectorXcd low = ball_profile(s.grid, 0.05 * background);
  const SeriesState a = inverse_born_series(op.exact_data(low), op, 3);
  const double e1 = rel(a.partial_sums[0], low), e3 = rel(a.partial_sums[2], low);
  MESSAGE("5% contrast: order-1 error " << e1 << ", order-3 error " << e3);
  CHECK(e3 <= 0.7 * e1);
  CHECK(rel(a.partial_sums[1], low) <= e1);

  const Eigen::VectorXcd high = ball_profile(s.grid, 3.0 * background);
  const SeriesState b = inverse_born_series(op.exact_data(high), op, 3);
  MESSAGE("300% contrast partial-sum norms " << b.partial_sums[0].norm() << " " << b.partial_sums[1].norm()
                                             << " " << b.partial_sums[2].norm());
  CHECK(b.partial_sums[1].norm() > b.partial_sums[0].norm());
  CHECK(b.partial_sums[2].norm() > b.partial_sums[1].norm());
}

TEST_CASE("convergence constants") {
  const ConvergenceConstants c = convergence_radius(1.0, 1.0, std::numeric_limits<double>::infinity(), 10.0);
  CHECK(std::abs(c.mu - oracle::mu_sup_quadrature(1.0, 1.0)) < 1e-6);
  CHECK(c.nu == 0.0);
  CHECK(c.radius == doctest::Approx(5.391).epsilon(1e-3));
  double prev = 1e300;
  for (double dist : {0.5, 1.0, 2.0, 4.0}) {
    const double nu = convergence_radius(1.0, 1.0, dist, 10.0).nu;
    CHECK(nu < prev);
    CHECK(nu >= 0.0);
    prev = nu;
  }
  CHECK(std::abs(convergence_radius(2.5, 0.4, 1e9, 1.0).mu - oracle::mu_sup_quadrature(2.5, 0.4)) < 1e-6);
  // R (ka)^{3/2} stays bounded for large ka
  double lo = 1e300, hi = 0.0;
  for (double k : {5.0, 10.0, 20.0}) {
    const double v = convergence_radius(k, 1.0, 1e9, 1.0).radius * std::pow(k, 1.5);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(hi < 1.01 * lo);
  CHECK(hi < 10.0);
  CHECK_ERROR_KIND(convergence_radius(0.0, 1.0, 1.0, 1.0), ErrorKind::InvalidArgument);
}
