#include <cmath>
#include <numbers>

#include "difftomo/linearize.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

namespace {

ParamField bumpy(const Mesh& m) {
  ParamField p = ParamField::uniform(m.node_count(), 0.1, 0.05, 1.0);
  for (int v = 0; v < m.node_count(); ++v) {
    p.mu_a[v] *= 1.0 + 0.3 * std::sin(3 * m.nodes[v].x());
    p.diff[v] *= 1.0 + 0.2 * std::cos(2 * m.nodes[v].y());
  }
  return p;
}

}  // namespace

TEST_CASE("Jacobian matches central differences") {
  const Mesh m = build_disk_mesh(1.0, 0.125);  // 217 nodes
  const ParamField p = bumpy(m);
  const auto L = ring_layout(m, 4, 4, 0.3);
  for (double omega : {0.0, 2 * std::numbers::pi * 0.1}) {
    const Jacobian J = assemble_jacobian(m, p, L, omega);
    CHECK(J.rows() == 16);
    double worst = 0.0;
    for (int k : {0, 17, 60, 150, 216}) {
      for (int block = 0; block < 2; ++block) {
        ParamField pp = p, pm = p;
        Eigen::VectorXd& xp = block ? pp.diff : pp.mu_a;
        Eigen::VectorXd& xm = block ? pm.diff : pm.mu_a;
        const double step = 1e-6 * std::abs(xp[k]);
        xp[k] += step;
        xm[k] -= step;
        const Eigen::VectorXcd fd =
            (flatten_data(forward_map(m, pp, L, omega)) - flatten_data(forward_map(m, pm, L, omega))) / (2 * step);
        const Eigen::VectorXcd col = block ? J.a_d.col(k) : J.a_mu.col(k);
        worst = std::max(worst, (fd - col).norm() / col.norm());
      }
    }
    MESSAGE("omega " << omega << " worst relative FD error " << worst);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("row-by-row and batched assembly agree") {
  const Mesh m = build_disk_mesh(1.0, 0.2);
  const ParamField p = bumpy(m);
  const auto L = ring_layout(m, 3, 5, 0.4);
  const Jacobian a = assemble_jacobian(m, p, L, 0.5, 1.0, JacobianMethod::Batched);
  const Jacobian b = assemble_jacobian(m, p, L, 0.5, 1.0, JacobianMethod::RowByRow);
  CHECK((a.a_mu - b.a_mu).norm() <= 1e-12 * a.a_mu.norm());
  CHECK((a.a_d - b.a_d).norm() <= 1e-12 * a.a_d.norm());
}

TEST_CASE("Jacobian structure") {
  const Mesh m = build_disk_mesh(1.0, 0.15);
  const ParamField p = bumpy(m);
  const auto L = ring_layout(m, 4, 4, 0.3);
  const Jacobian J0 = assemble_jacobian(m, p, L, 0.0);
  CHECK(J0.a_mu.imag().cwiseAbs().maxCoeff() == 0.0);
  CHECK(J0.a_mu.real().maxCoeff() < 0.0);  // more absorption, less light
  CHECK(J0.combined().allFinite());
  CHECK((J0.a_mu * Eigen::VectorXcd::Zero(m.node_count())).norm() == 0.0);

  const Jacobian J = assemble_jacobian(m, p, L, 0.8);
  const Eigen::MatrixXcd A = J.combined();
  std::mt19937 rng(5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 5; ++t) {
    Eigen::VectorXcd x(A.cols()), y(A.rows());
    for (auto& v : x) v = {g(rng), g(rng)};
    for (auto& v : y) v = {g(rng), g(rng)};
    const cdouble lhs = (A * x).dot(y);
    const cdouble rhs = x.dot(A.adjoint() * y);
    CHECK(std::abs(lhs - rhs) / (A.norm() * x.norm() * y.norm()) < 1e-12);
  }

  // swapping the roles of one source and one detector with equal profiles
  SourceDetectorLayout same = ring_layout(m, 4, 4, 0.3);
  same.detectors = same.sources;
  const Jacobian Js = assemble_jacobian(m, p, same, 0.8);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      CHECK((Js.a_mu.row(a * 4 + b) - Js.a_mu.row(b * 4 + a)).norm() <= 1e-10 * Js.a_mu.row(a * 4 + b).norm());
}

TEST_CASE("Born kernels") {
  Background bg;
  bg.mu_a = 0.05;
  bg.d0 = 0.4;
  bg.c = 1.0;
  bg.omega = 0.3;
  const BornKernels K = born_kernels(bg);
  const Point3 r1(0, 0, 0), r2(2, 0, 0), r(1, 0.5, 0.7), rp(0.5, -0.4, 1.1);
  CHECK(std::abs(K.k1_1(r1, r2, r) - K.k1_1(r2, r1, r)) < 1e-16);
  CHECK(std::abs(K.k1_1(r1, r2, r) - K.green(r1, r) * K.green(r, r2)) == 0.0);
  CHECK_ERROR_KIND(K.k2_11(r1, r2, r, r), ErrorKind::SingularEvaluation);
  CHECK_ERROR_KIND(K.k1_1(r1, r2, r1), ErrorKind::SingularEvaluation);

  // gradient kernels against central differences of the scalar kernels
  const double h = 1e-5;
  cdouble k12 = 0.0, k21 = 0.0, k22 = 0.0, k1_2 = 0.0;
  for (int a = 0; a < 3; ++a) {
    Point3 d = Point3::Zero();
    d[a] = h;
    // d/dr of G(r1,r) and G(r,r2)
    const cdouble g1 = (K.green(r1, r + d) - K.green(r1, r - d)) / (2 * h);
    const cdouble g2 = (K.green(r + d, r2) - K.green(r - d, r2)) / (2 * h);
    k1_2 += g1 * g2;
    const cdouble gr_rp = (K.green(r + d, rp) - K.green(r - d, rp)) / (2 * h);
    k21 += -g1 * gr_rp * K.green(rp, r2);
    const cdouble grp_r = (K.green(r, rp + d) - K.green(r, rp - d)) / (2 * h);
    const cdouble grp_r2 = (K.green(rp + d, r2) - K.green(rp - d, r2)) / (2 * h);
    k12 += -K.green(r1, r) * grp_r * grp_r2;
    // d/dr of [grad_r' G(r,r') . grad_r' G(r',r2)]
    auto inner = [&](const Point3& rr) {
      cdouble s = 0.0;
      for (int b = 0; b < 3; ++b) {
        Point3 e = Point3::Zero();
        e[b] = 1e-4;
        s += (K.green(rr, rp + e) - K.green(rr, rp - e)) / 2e-4 *
             ((K.green(rp + e, r2) - K.green(rp - e, r2)) / 2e-4);
      }
      return s;
    };
    k22 += -g1 * (inner(r + d * 10) - inner(r - d * 10)) / (20 * h);
  }
  CHECK(std::abs(K.k1_2(r1, r2, r) - k1_2) < 1e-6 * std::abs(k1_2));
  CHECK(std::abs(K.k2_12(r1, r2, r, rp) - k12) < 1e-6 * std::abs(k12));
  CHECK(std::abs(K.k2_21(r1, r2, r, rp) - k21) < 1e-6 * std::abs(k21));
  CHECK(std::abs(K.k2_22(r1, r2, r, rp) - k22) < 1e-4 * std::abs(k22));
}

TEST_CASE("multispectral assembly") {
  const ScatteringFactors f = scattering_factors(1.0, 1.0, Eigen::Vector2d(1.0, 2.0));
  CHECK(f.b_a[0] == doctest::Approx(1.0));
  CHECK(f.b_a[1] == doctest::Approx(0.5));
  CHECK(f.b_b[0] == doctest::Approx(0.0));
  CHECK(f.b_b[1] == doctest::Approx(0.34657).epsilon(1e-5));

  const Mesh m = build_disk_mesh(1.0, 0.3);
  const auto L = ring_layout(m, 2, 2, 0.5);
  const ParamField p = bumpy(m);
  std::vector<Jacobian> js = {assemble_jacobian(m, p, L, 0.0), assemble_jacobian(m, p, L, 0.2)};
  const Eigen::MatrixXd eps = Eigen::MatrixXd::Ones(1, 2);
  const Eigen::MatrixXcd B = assemble_multispectral(js, eps, 0.0, 1.0, Eigen::Vector2d(1.0, 2.0));
  const int n = m.node_count(), r = js[0].rows();
  CHECK(B.rows() == 2 * r);
  CHECK(B.cols() == 3 * n);
  CHECK(B.block(0, 0, r, n) == js[0].a_mu);
  CHECK(B.block(r, 0, r, n) == js[1].a_mu);
  CHECK(B.block(0, 2 * n, 2 * r, n).norm() == 0.0);  // a = 0 zeroes the power column

  const Eigen::MatrixXcd Z = assemble_multispectral(js, Eigen::MatrixXd::Zero(1, 2), 1.0, 1.0, Eigen::Vector2d(1.0, 2.0));
  CHECK(Z.block(0, 0, 2 * r, n).norm() == 0.0);
  CHECK_ERROR_KIND(assemble_multispectral(js, Eigen::MatrixXd::Ones(1, 3), 1, 1, Eigen::Vector2d(1, 2)),
                   ErrorKind::InvalidArgument);
  js[1].a_mu.conservativeResize(r, n - 1);
  CHECK_ERROR_KIND(assemble_multispectral(js, eps, 1, 1, Eigen::Vector2d(1, 2)), ErrorKind::InvalidArgument);
}
