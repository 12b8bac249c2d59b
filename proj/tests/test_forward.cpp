#include <cmath>
#include <limits>
#include <numbers>

#include "difftomo/forward.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

namespace {

ParamField blob_params(const Mesh& m, double c = 1.0) {
  ParamField p = ParamField::uniform(m.node_count(), 0.1, 0.05, c);
  for (int v = 0; v < m.node_count(); ++v) {
    const auto& x = m.nodes[v];
    p.mu_a[v] += 0.05 * std::exp(-8.0 * (x - Eigen::Vector2d(0.3, 0.2)).squaredNorm());
    p.diff[v] += 0.01 * std::exp(-8.0 * (x - Eigen::Vector2d(-0.2, -0.3)).squaredNorm());
  }
  return p;
}

double max_abs(const SpMatC& a) {
  double r = 0.0;
  for (int k = 0; k < a.outerSize(); ++k)
    for (SpMatC::InnerIterator it(a, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

}  // namespace

TEST_CASE("unit square reduces to the standard stiffness matrix") {
  std::vector<Eigen::Vector2d> nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Mesh m = Mesh::from_triangles(nodes, {{0, 1, 2}, {0, 3, 2}});
  ParamField p;
  p.mu_a = Eigen::VectorXd::Zero(4);
  p.diff = Eigen::VectorXd::Ones(4);
  p.c = 1.0;
  const SystemMatrix sys = assemble_system(m, p, 0.0, std::numeric_limits<double>::infinity());
  Eigen::Matrix4d expected;
  expected << 1, -0.5, 0, -0.5, -0.5, 1, -0.5, 0, 0, -0.5, 1, -0.5, -0.5, 0, -0.5, 1;
  const Eigen::MatrixXcd K = Eigen::MatrixXcd(sys.k_matrix);
  CHECK((K - expected.cast<cdouble>()).norm() < 1e-14);
  CHECK_ERROR_KIND(solve_forward(sys, ring_layout(m, 1, 1, 1.0)), ErrorKind::SingularSystem);
}

TEST_CASE("system matrix decomposes into its parts") {
  const Mesh m = build_disk_mesh(1.0, 0.2);
  const ParamField p = blob_params(m, 1.7);
  const double omega = 0.6;
  const SystemMatrix sys = assemble_system(m, p, omega, 1.3);
  SpMatC sum = sys.surface.cast<cdouble>() + cdouble(0, omega) * sys.mass.cast<cdouble>();
  for (int k = 0; k < m.node_count(); ++k)
    sum += (p.diff[k] * sys.deriv_d[k] + p.c * p.mu_a[k] * sys.deriv_mu[k]).cast<cdouble>();
  CHECK(max_abs(sum - sys.k_matrix) < 1e-13 * max_abs(sys.k_matrix));
  const SpMatC Kt = sys.k_matrix.transpose();
  CHECK(max_abs(sys.k_matrix - Kt) == 0.0);
  // mass matrix integrates constants exactly
  CHECK(Eigen::VectorXd::Ones(m.node_count()).dot(sys.mass * Eigen::VectorXd::Ones(m.node_count())) ==
        doctest::Approx(m.total_area()).epsilon(1e-12));
  // stiffness annihilates constants
  SpMat stiff(m.node_count(), m.node_count());
  for (int k = 0; k < m.node_count(); ++k) stiff += sys.deriv_d[k];
  CHECK((stiff * Eigen::VectorXd::Ones(m.node_count())).norm() < 1e-12);
}

TEST_CASE("forward solve accuracy and field properties") {
  const Mesh m = build_disk_mesh(1.0, 0.1);
  const ParamField p = blob_params(m);
  const auto layout = ring_layout(m, 8, 8, 0.3);
  CHECK_NOTHROW(layout.validate(m));
  for (double omega : {0.0, 2.0 * std::numbers::pi * 0.1}) {
    const SystemMatrix sys = assemble_system(m, p, omega, 1.0, false);
    const Eigen::MatrixXcd U = solve_forward(sys, layout);
    const Eigen::MatrixXcd q = load_vectors(sys, layout);
    for (int s = 0; s < layout.n_sources(); ++s)
      CHECK((sys.k_matrix * U.col(s) - q.col(s)).norm() / q.col(s).norm() < 1e-10);
    if (omega == 0.0) {
      CHECK(U.imag().cwiseAbs().maxCoeff() == 0.0);
      CHECK(U.real().minCoeff() > 0.0);
      // net outgoing current never exceeds the injected current
      const Eigen::VectorXd one = Eigen::VectorXd::Ones(m.node_count());
      for (int s = 0; s < layout.n_sources(); ++s) {
        const Eigen::VectorXd src = profile_density(sys, layout.sources[s]);
        const Eigen::VectorXd net = (p.c * U.col(s).real() - src) / (2.0 * sys.zeta);
        CHECK(one.dot(sys.boundary_mass * net) <= one.dot(sys.boundary_mass * src));
      }
    }
  }
}

TEST_CASE("adjoint identity and reciprocity") {
  const Mesh m = build_disk_mesh(1.0, 0.15);
  const ParamField p = blob_params(m);
  const SystemMatrix sys = assemble_system(m, p, 0.7, 1.0, false);
  ForwardFactor f(sys.k_matrix);
  std::mt19937 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXcd a(m.node_count()), b(m.node_count());
    for (int i = 0; i < m.node_count(); ++i) a[i] = {g(rng), g(rng)}, b[i] = {g(rng), g(rng)};
    const cdouble lhs = (f.solve(a).transpose() * b)(0);
    const cdouble rhs = (a.transpose() * f.solve(b))(0);
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::abs(lhs));
  }
  // identical source and detector profiles give a symmetric data matrix
  SourceDetectorLayout L = ring_layout(m, 6, 6, 0.4);
  L.detectors = L.sources;
  const Eigen::MatrixXcd d = forward_map(m, p, L, 0.7);
  CHECK((d - d.transpose()).norm() <= 1e-10 * d.norm());
}

TEST_CASE("forward map is deterministic, affine in the source, rotation invariant") {
  const Mesh m = build_disk_mesh(1.0, 0.1);
  const ParamField p = ParamField::uniform(m.node_count(), 0.1, 0.05, 1.0);
  const auto L = ring_layout(m, 6, 6, 0.3);
  const Eigen::MatrixXcd d1 = forward_map(m, p, L, 0.5);
  const Eigen::MatrixXcd d2 = forward_map(m, p, L, 0.5);
  CHECK(d1 == d2);
  for (int s = 0; s < 6; ++s)
    for (int mm = 0; mm < 6; ++mm) {
      const cdouble ref = d1(mm, s);
      const cdouble rot = d1((mm + 1) % 6, (s + 1) % 6);
      CHECK(std::abs(ref - rot) <= 1e-10 * std::abs(ref));
    }
  SourceDetectorLayout mix = L;
  mix.sources = {0.3 * L.sources[0] + 0.7 * L.sources[2]};
  const Eigen::MatrixXcd dm = forward_map(m, p, mix, 0.5);
  const Eigen::MatrixXcd expect = 0.3 * d1.col(0) + 0.7 * d1.col(2);
  CHECK((dm.col(0) - expect).norm() <= 1e-10 * expect.norm());
}

TEST_CASE("measurement of a field that cancels the source is zero") {
  const Mesh m = build_disk_mesh(1.0, 0.2);
  const ParamField p = ParamField::uniform(m.node_count(), 0.1, 0.05, 2.0);
  const SystemMatrix sys = assemble_system(m, p, 0.0, 1.0, false);
  const auto L = ring_layout(m, 1, 1, 0.5);
  Eigen::MatrixXcd U = (profile_density(sys, L.sources[0]) / p.c).cast<cdouble>();
  CHECK(std::abs(measure_boundary(sys, L, U)(0, 0)) < 1e-15);
}

TEST_CASE("boundary data converge at second order") {
  const ParamField dummy;
  auto run = [](double h) {
    const Mesh m = build_disk_mesh(1.0, h);
    const ParamField p = blob_params(m);
    const auto L = ring_layout(m, 4, 4, 0.6);
    return forward_map(m, p, L, 0.3);
  };
  const Eigen::MatrixXcd d1 = run(0.2), d2 = run(0.1), d3 = run(0.05), ref = run(0.0125);
  const double e1 = (d1 - ref).norm(), e2 = (d2 - ref).norm(), e3 = (d3 - ref).norm();
  MESSAGE("errors " << e1 << " " << e2 << " " << e3);
  // profile sampling makes single halvings uneven; the rate over two is close to 4
  CHECK(e1 / e2 > 3.0);
  CHECK(e1 / e3 > 8.0);
}

TEST_CASE("layout validation") {
  const Mesh m = build_disk_mesh(1.0, 0.25);
  auto L = ring_layout(m, 2, 2, 0.5);
  auto bad = L;
  bad.sources[0] *= 2.0;
  CHECK_ERROR_KIND(bad.validate(m), ErrorKind::InvalidArgument);
  bad = L;
  bad.detectors[0].setZero();
  bad.detectors[0][0] = 1.0;  // centre node is interior
  CHECK_ERROR_KIND(bad.validate(m), ErrorKind::InvalidArgument);
}

TEST_CASE("data file round trip") {
  const auto dir = scratch_dir("forward");
  Eigen::MatrixXcd d(3, 2);
  d << cdouble(1, 2), cdouble(3, 4), cdouble(-5, 0.1), cdouble(1e-300, 7), cdouble(0.1, 0.2), cdouble(8, 9);
  write_data(d, (dir / "d.csv").string());
  CHECK(read_data((dir / "d.csv").string()) == d);
  CHECK(unflatten_data(flatten_data(d), 3, 2) == d);
  CHECK(flatten_data(d)[1] == d(0, 1));
}
