#include <cmath>
#include <numbers>

#include "difftomo/mesh.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

TEST_CASE("disk mesh rejects bad sizes") {
  CHECK_ERROR_KIND(build_disk_mesh(1.0, 2.0), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(build_disk_mesh(0.0, 0.1), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(build_disk_mesh(1.0, -0.1), ErrorKind::InvalidArgument);
  CHECK_ERROR_KIND(build_disk_mesh(1.0, 1.0), ErrorKind::InvalidArgument);
}

TEST_CASE("disk mesh invariants") {
  for (double h : {0.5, 0.3, 0.17, 0.1}) {
    const Mesh m = build_disk_mesh(1.0, h);
    CHECK_NOTHROW(m.validate());
    for (int e = 0; e < m.element_count(); ++e) CHECK(m.signed_area(e) > 0.0);
    for (int v : m.boundary_nodes()) CHECK(std::abs(m.nodes[v].norm() - 1.0) <= h * h);
    CHECK(std::abs(m.total_area() - std::numbers::pi) <= h * h);
    for (const auto& be : m.boundary_edges) {
      const Eigen::Vector2d mid = 0.5 * (m.nodes[be.a] + m.nodes[be.b]);
      CHECK(be.normal.dot(mid) > 0.0);
      CHECK(std::abs(be.normal.norm() - 1.0) < 1e-12);
    }
  }
  const Mesh m = build_disk_mesh(1.0, 0.5);
  CHECK(std::abs(m.total_area() - std::numbers::pi) < 0.25);
}

TEST_CASE("halving h at least quadruples the element count") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(0.05, 0.9);
  for (int i = 0; i < 40; ++i) {
    const double h = u(rng);
    const int coarse = build_disk_mesh(1.0, h).element_count();
    const int fine = build_disk_mesh(1.0, h / 2).element_count();
    CHECK(fine >= 4 * coarse);
  }
}

TEST_CASE("disk mesh is six-fold symmetric") {
  const Mesh m = build_disk_mesh(2.0, 0.4);
  const double c = std::cos(std::numbers::pi / 3), s = std::sin(std::numbers::pi / 3);
  for (const auto& p : m.nodes) {
    const Eigen::Vector2d r(c * p.x() - s * p.y(), s * p.x() + c * p.y());
    double best = 1e9;
    for (const auto& q : m.nodes) best = std::min(best, (q - r).norm());
    CHECK(best < 1e-12);
  }
}

TEST_CASE("two-triangle square") {
  std::vector<Eigen::Vector2d> nodes = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  const Mesh m = Mesh::from_triangles(nodes, {{0, 1, 2}, {0, 3, 2}});
  CHECK_NOTHROW(m.validate());
  CHECK(m.boundary_edges.size() == 4);
  CHECK(m.total_area() == doctest::Approx(1.0));
  CHECK(m.boundary_nodes().size() == 4);
}

TEST_CASE("validation catches broken meshes") {
  Mesh m = build_disk_mesh(1.0, 0.5);
  Mesh bad = m;
  std::swap(bad.triangles[0][1], bad.triangles[0][2]);
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidGeometry);
  bad = m;
  bad.triangles[0][0] = 1000;
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidGeometry);
  bad = m;
  bad.boundary_edges.pop_back();
  CHECK_ERROR_KIND(bad.validate(), ErrorKind::InvalidGeometry);
}

TEST_CASE("phantom rasterization") {
  const Mesh m = build_disk_mesh(1.0, 0.1);
  Phantom ph;
  ph.mu_a = 0.01;
  ph.diff = 0.3;
  ph.inclusions.push_back({{0.0, 0.0}, 0.5, 0.05, 0.2});
  ph.inclusions.push_back({{0.3, 0.0}, 0.3, 0.09, 0.1});
  const ParamField p = rasterize_phantom(ph, m);
  for (int v = 0; v < m.node_count(); ++v) {
    const auto& x = m.nodes[v];
    if ((x - Eigen::Vector2d(0.3, 0)).norm() <= 0.3) {
      CHECK(p.mu_a[v] == 0.09);
    } else if (x.norm() <= 0.5) {
      CHECK(p.mu_a[v] == 0.05);
    } else {
      CHECK(p.mu_a[v] == 0.01);
      CHECK(p.diff[v] == 0.3);
    }
  }
  const ParamField again = rasterize_phantom(ph, m);
  CHECK(again.mu_a == p.mu_a);
  CHECK(again.diff == p.diff);

  Phantom empty;
  const ParamField u = rasterize_phantom(empty, m);
  CHECK((u.mu_a.array() == empty.mu_a).all());

  Phantom bad = ph;
  bad.inclusions[0].radius = 0.0;
  CHECK_ERROR_KIND(rasterize_phantom(bad, m), ErrorKind::InvalidArgument);
}

TEST_CASE("mesh and parameter files round trip") {
  const auto dir = scratch_dir("mesh");
  const Mesh m = build_disk_mesh(1.0, 0.25);
  write_mesh(m, (dir / "m.mesh").string());
  const Mesh r = read_mesh((dir / "m.mesh").string());
  REQUIRE(r.node_count() == m.node_count());
  REQUIRE(r.element_count() == m.element_count());
  for (int i = 0; i < m.node_count(); ++i) CHECK(r.nodes[i] == m.nodes[i]);
  for (int e = 0; e < m.element_count(); ++e) CHECK(r.triangles[e] == m.triangles[e]);
  CHECK(r.boundary_edges.size() == m.boundary_edges.size());

  ParamField p = ParamField::uniform(m.node_count(), 0.02, 0.3, 1.0);
  p.mu_a[3] = 0.123456789012345678;
  write_params(p, (dir / "p.csv").string());
  const ParamField q = read_params((dir / "p.csv").string(), 1.0);
  CHECK(q.mu_a == p.mu_a);
  CHECK(q.diff == p.diff);
}

TEST_CASE("interpolation reproduces linear fields") {
  const Mesh coarse = build_disk_mesh(1.0, 0.25);
  const Mesh fine = build_disk_mesh(1.0, 0.1);
  Eigen::VectorXd f(coarse.node_count());
  for (int v = 0; v < coarse.node_count(); ++v) f[v] = 1.0 + 2.0 * coarse.nodes[v].x() - coarse.nodes[v].y();
  const Eigen::VectorXd g = interpolate_nodal(coarse, f, fine);
  for (int v = 0; v < fine.node_count(); ++v) {
    if (fine.nodes[v].norm() > 0.95) continue;  // outside the inscribed polygon
    CHECK(g[v] == doctest::Approx(1.0 + 2.0 * fine.nodes[v].x() - fine.nodes[v].y()).epsilon(1e-12));
  }
}
