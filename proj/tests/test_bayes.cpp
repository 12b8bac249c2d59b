#include <cmath>
#include <memory>
#include <random>

#include <Eigen/Dense>

#include "difftomo/bayes.hpp"
#include "difftomo/fem_model.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace difftomo;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

Covariance random_spd(int n, std::uint64_t seed) {
  const Eigen::MatrixXd b = random_matrix(n, n, seed);
  return Covariance::from_matrix(b * b.transpose() / n + Eigen::MatrixXd::Identity(n, n));
}

Mesh unit_square() {
  return Mesh::from_triangles({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
}

// Shifts every datum of an inner model by a constant vector.
class ShiftedModel : public Model {
 public:
  ShiftedModel(std::shared_ptr<const Model> inner, Eigen::VectorXd b) : inner_(std::move(inner)), b_(std::move(b)) {}
  int parameter_count() const override { return inner_->parameter_count(); }
  int data_count() const override { return inner_->data_count(); }
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const override { return inner_->forward(x) + b_; }
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const override { return inner_->jacobian(x); }

 private:
  std::shared_ptr<const Model> inner_;
  Eigen::VectorXd b_;
};

}  // namespace

TEST_CASE("noise covariances") {
  const Eigen::Vector2d y(4.0, 9.0);
  const NoiseModel p = noise_covariance(y, NoiseKind::Poisson);
  CHECK(p.gamma_e.matrix().isApprox(Eigen::Vector2d(4, 9).asDiagonal().toDenseMatrix()));
  CHECK(p.whitening()(0, 0) == doctest::Approx(0.5));
  CHECK(p.whitening()(1, 1) == doctest::Approx(1.0 / 3.0));
  const NoiseModel r = noise_covariance(y, NoiseKind::Relative);
  CHECK(r.gamma_e.matrix().diagonal().isApprox(Eigen::Vector2d(16, 81)));
  const NoiseModel w = noise_covariance(y, NoiseKind::White);
  CHECK(w.gamma_e.matrix().isIdentity());
  CHECK(noise_covariance(y, NoiseKind::Relative, 0.01).gamma_e.matrix()(1, 1) == doctest::Approx(81e-4));

  CHECK_ERROR_KIND(noise_covariance(Eigen::Vector2d(1, 0), NoiseKind::Poisson), ErrorKind::InvalidData);
  CHECK_ERROR_KIND(noise_covariance(Eigen::Vector2d(1, -2), NoiseKind::Poisson), ErrorKind::InvalidData);
  CHECK_ERROR_KIND(noise_covariance(Eigen::Vector2d(0, 1), NoiseKind::Relative), ErrorKind::InvalidData);
  CHECK(noise_covariance(Eigen::Vector2d(0, -1), NoiseKind::White).gamma_e.size() == 2);
}

TEST_CASE("smoothness prior assembly") {
  const Mesh sq = unit_square();
  const PriorModel p = smoothness_prior(sq, Eigen::VectorXd::Ones(4), 0.0 + 1e-3);
  Eigen::MatrixXd expect(4, 4);
  // right angles at node 1 (first triangle) and node 3 (second triangle)
  expect << 1.0, -0.5, 0.0, -0.5,
           -0.5, 1.0, -0.5, 0.0,
            0.0, -0.5, 1.0, -0.5,
           -0.5, 0.0, -0.5, 1.0;
  const Eigen::MatrixXd unshifted = Eigen::MatrixXd(p.precision) - 1e-3 * Eigen::MatrixXd::Identity(4, 4);
  CHECK((unshifted - expect).cwiseAbs().maxCoeff() < 1e-14);

  const Mesh m = build_disk_mesh(1.0, 0.25);
  Eigen::VectorXd k(m.node_count());
  for (int i = 0; i < k.size(); ++i) k[i] = 1.0 + m.nodes[i].x() * m.nodes[i].x();
  const PriorModel a = smoothness_prior(m, k, 0.5);
  const PriorModel b = smoothness_prior(m, 2.0 * k, 0.5);
  const Eigen::MatrixXd ua = Eigen::MatrixXd(a.precision) - 0.5 * Eigen::MatrixXd::Identity(k.size(), k.size());
  const Eigen::MatrixXd ub = Eigen::MatrixXd(b.precision) - 0.5 * Eigen::MatrixXd::Identity(k.size(), k.size());
  CHECK((ub - 2.0 * ua).norm() < 1e-12 * ua.norm());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(k.size());
  CHECK(std::abs(ones.dot(ua * ones)) < 1e-12 * ua.norm());
  CHECK((ua * ones).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Eigen::MatrixXd(a.precision) * a.covariance - Eigen::MatrixXd::Identity(k.size(), k.size()))
            .cwiseAbs()
            .maxCoeff() < 1e-9);

  const PriorModel auto_ridge = smoothness_prior(m, k);
  CHECK(auto_ridge.eps_pd == doctest::Approx(1e-8 * ua.trace() / k.size()));
  CHECK_ERROR_KIND(smoothness_prior(m, -k), ErrorKind::InvalidArgument);
}

TEST_CASE("MRF and database priors") {
  const Mesh m = build_disk_mesh(1.0, 0.5);
  const PriorModel mrf = mrf_prior(m, 2.0, 0.1);
  const Eigen::MatrixXd l = Eigen::MatrixXd(mrf.precision) - 0.1 * Eigen::MatrixXd::Identity(m.node_count(), m.node_count());
  CHECK((l * Eigen::VectorXd::Ones(m.node_count())).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(l(0, 0) == doctest::Approx(2.0 * m.adjacency()[0].size()));

  const auto draws = sample_prior(mrf, 50, 3);
  const PriorModel db = database_prior(draws, 0.0 + 1e-6);
  CHECK(db.kind == PriorKind::Database);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m.node_count());
  for (const auto& d : draws) mean += d / 50.0;
  CHECK((db.mean - mean).norm() < 1e-12);
  CHECK_ERROR_KIND(database_prior({draws[0]}), ErrorKind::InvalidArgument);
}

TEST_CASE("prior sampling statistics") {
  const Mesh m = build_disk_mesh(1.0, 0.5);
  REQUIRE(m.node_count() == 19);
  Eigen::VectorXd mu(m.node_count());
  for (int i = 0; i < mu.size(); ++i) mu[i] = 0.5 + m.nodes[i].y();
  const PriorModel prior = correlation_prior(m, mu, 0.3, 0.6);
  const int n = 10000;
  const auto draws = sample_prior(prior, n, 42);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(mu.size());
  for (const auto& d : draws) mean += d / n;
  bool within = true;
  for (int i = 0; i < mu.size(); ++i)
    within = within && std::abs(mean[i] - mu[i]) < 3.0 * std::sqrt(prior.covariance(i, i) / n);
  CHECK(within);
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mu.size(), mu.size());
  for (const auto& d : draws) cov += (d - mean) * (d - mean).transpose() / (n - 1);
  const double rel = (cov - prior.covariance).norm() / prior.covariance.norm();
  MESSAGE("sample covariance relative error " << rel);
  CHECK(rel < 0.1);

  const auto again = sample_prior(prior, 5, 42);
  for (int i = 0; i < 5; ++i) CHECK(again[i] == draws[i]);
  CHECK(sample_prior(prior, 1, 43)[0] != draws[0]);
}

TEST_CASE("Gaussian posterior") {
  SUBCASE("identity model") {
    const Eigen::Vector3d y(1.0, -2.0, 4.0);
    const Posterior p = gaussian_posterior(Eigen::Matrix3d::Identity(), y, Covariance::identity(3),
                                           Covariance::identity(3));
    CHECK((p.mean - y / 2).norm() < 1e-15);
    CHECK((p.covariance - Eigen::Matrix3d::Identity() / 2).norm() < 1e-15);
  }
  SUBCASE("data at its expectation") {
    const Eigen::MatrixXd a = random_matrix(6, 4, 1);
    const Eigen::VectorXd xs = random_matrix(4, 1, 2).col(0), es = random_matrix(6, 1, 3).col(0);
    const Posterior p = gaussian_posterior(a, a * xs + es, random_spd(4, 4), random_spd(6, 5), xs, es);
    CHECK((p.mean - xs).norm() < 1e-12);
  }
  SUBCASE("mean equals Tikhonov with alpha one, covariance SPD") {
    const Eigen::MatrixXd a = random_matrix(12, 8, 6);
    const Eigen::VectorXd y = random_matrix(12, 1, 7).col(0);
    const Covariance gx = random_spd(8, 8), ge = random_spd(12, 9);
    const Posterior p = gaussian_posterior(a, y, gx, ge);
    const Eigen::VectorXd t = tikhonov_newton(a, y, 1.0, ge, gx);
    CHECK((p.mean - t).norm() <= 1e-10 * t.norm());
    CHECK((p.covariance - p.covariance.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p.covariance).eigenvalues().minCoeff() > 0.0);
    const Eigen::MatrixXd info = a.transpose() * ge.precision() * a + gx.precision();
    CHECK((p.covariance - info.inverse()).norm() < 1e-10 * p.covariance.norm());
  }
}

TEST_CASE("approximation error statistics") {
  const Eigen::MatrixXd a = random_matrix(5, 4, 10);
  auto lin = std::make_shared<LinearModel>(a);
  const Mesh m = Mesh::from_triangles({{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {{0, 1, 2}, {0, 2, 3}});
  const PriorModel prior = correlation_prior(m, Eigen::VectorXd::Zero(4), 1.0, 1.0, 1e-2);

  const ApproxErrorStats same = approximation_error(prior, *lin, *lin, 10, 1);
  CHECK(same.mean.norm() == 0.0);
  CHECK(same.covariance.norm() == 0.0);

  const Eigen::VectorXd b = random_matrix(5, 1, 11).col(0);
  const ShiftedModel shifted(lin, b);
  const ApproxErrorStats st = approximation_error(prior, *lin, shifted, 10, 1);
  CHECK((st.mean + b).norm() < 1e-12);
  CHECK(st.covariance.norm() < 1e-20);
  CHECK(st.samples == 10);
  CHECK_ERROR_KIND(approximation_error(prior, *lin, *lin, 1, 1), ErrorKind::InvalidArgument);

  const NoiseModel base = noise_covariance(Eigen::VectorXd::Ones(5), NoiseKind::White, 0.1);
  ApproxErrorStats fake = st;
  fake.covariance = Eigen::MatrixXd::Identity(5, 5);
  const NoiseModel corr = fake.corrected(base);
  CHECK(corr.gamma_e.matrix()(0, 0) == doctest::Approx(1.01));
  CHECK((corr.mean - st.mean).norm() == 0.0);

  const auto dir = scratch_dir("bayes");
  write_approx_error(fake, (dir / "m.csv").string(), (dir / "c.csv").string());
  const ApproxErrorStats back = read_approx_error((dir / "m.csv").string(), (dir / "c.csv").string());
  CHECK(back.mean == fake.mean);
  CHECK(back.covariance == fake.covariance);
}

TEST_CASE("coarse versus fine FEM modelling error") {
  const Mesh fine = build_disk_mesh(1.0, 0.1);
  const Mesh coarse = build_disk_mesh(1.0, 0.2);
  const ParamField bg_f = ParamField::uniform(fine.node_count(), 0.1, 0.05, 1.0);
  const ParamField bg_c = ParamField::uniform(coarse.node_count(), 0.1, 0.05, 1.0);
  auto fm = std::make_shared<FemModel>(fine, ring_layout(fine, 6, 6, 0.3), bg_f, 0.0, Unknowns::Absorption);
  auto cm = std::make_shared<FemModel>(coarse, ring_layout(coarse, 6, 6, 0.3), bg_c, 0.0, Unknowns::Absorption);
  const MappedModel mapped(fm, interpolation_matrix(coarse, fine));
  const PriorModel prior =
      correlation_prior(coarse, Eigen::VectorXd::Constant(coarse.node_count(), 0.1), 0.02, 0.3);
  const ApproxErrorStats st = approximation_error(prior, mapped, *cm, 20, 5);
  CHECK(st.covariance.trace() > 0.0);
  CHECK(st.mean.norm() > 0.0);

  // reference-corrected coarse model hits the reference data exactly
  const Eigen::VectorXd xref = Eigen::VectorXd::Constant(coarse.node_count(), 0.1);
  const Eigen::VectorXd yref = mapped.forward(xref);
  const CorrectedModel cmod(cm, xref, yref);
  CHECK(cmod.forward(xref) == yref);
  const Eigen::VectorXd x2 = xref * 1.2;
  CHECK((cmod.forward(x2) - (cm->forward(x2) + yref - cm->forward(xref))).norm() < 1e-12 * yref.norm());
}
