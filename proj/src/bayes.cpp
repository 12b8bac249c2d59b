#include "difftomo/bayes.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "difftomo/error.hpp"
#include "difftomo/io.hpp"

namespace difftomo {

namespace {

using SpMat = Eigen::SparseMatrix<double>;

Eigen::VectorXd mean_or_zero(const Eigen::VectorXd& mean, int n) {
  if (mean.size() == 0) return Eigen::VectorXd::Zero(n);
  require(mean.size() == n, ErrorKind::InvalidArgument, "prior mean length mismatch");
  return mean;
}

Eigen::MatrixXd dense_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  require(llt.info() == Eigen::Success, ErrorKind::InvalidCovariance, "matrix is not positive definite");
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

PriorModel from_precision(PriorKind kind, SpMat unshifted, double eps_pd, Eigen::VectorXd mean) {
  const int n = static_cast<int>(unshifted.rows());
  PriorModel p;
  p.kind = kind;
  p.eps_pd = eps_pd < 0.0 ? default_ridge(unshifted) : eps_pd;
  SpMat eye(n, n);
  eye.setIdentity();
  p.precision = unshifted + p.eps_pd * eye;
  p.covariance = dense_inverse(Eigen::MatrixXd(p.precision));
  p.mean = std::move(mean);
  return p;
}

PriorModel from_covariance(PriorKind kind, Eigen::MatrixXd cov, double eps_pd, Eigen::VectorXd mean) {
  const int n = static_cast<int>(cov.rows());
  PriorModel p;
  p.kind = kind;
  p.eps_pd = eps_pd < 0.0 ? 1e-8 * cov.trace() / n : eps_pd;
  cov.diagonal().array() += p.eps_pd;
  p.covariance = 0.5 * (cov + cov.transpose());
  p.precision = dense_inverse(p.covariance).sparseView();
  p.mean = std::move(mean);
  return p;
}

// Independent standard normal vector for draw `index` of stream `seed`.
Eigen::VectorXd normal_draw(int n, std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> nd;
  Eigen::VectorXd xi(n);
  for (int i = 0; i < n; ++i) xi[i] = nd(rng);
  return xi;
}

}  // namespace

Eigen::VectorXd NoiseModel::sample(std::uint64_t seed) const {
  const Eigen::VectorXd xi = normal_draw(gamma_e.size(), seed, 0);
  Eigen::VectorXd e = gamma_e.unwhiten(xi);
  if (mean.size()) e += mean;
  return e;
}

NoiseModel noise_covariance(const Eigen::VectorXd& y, NoiseKind kind, double level) {
  require(y.size() > 0 && y.allFinite(), ErrorKind::InvalidData, "data must be finite and non-empty");
  require(std::isfinite(level) && level > 0.0, ErrorKind::InvalidArgument, "noise level must be positive");
  Eigen::VectorXd var(y.size());
  for (int i = 0; i < y.size(); ++i) {
    switch (kind) {
      case NoiseKind::Poisson:
        require(y[i] > 0.0, ErrorKind::InvalidData, "Poisson noise needs positive data");
        var[i] = y[i];
        break;
      case NoiseKind::Relative:
        require(y[i] != 0.0, ErrorKind::InvalidData, "relative noise needs nonzero data");
        var[i] = y[i] * y[i];
        break;
      case NoiseKind::White:
        var[i] = 1.0;
        break;
    }
  }
  NoiseModel nm;
  nm.kind = kind;
  nm.gamma_e = Covariance::diagonal(level * level * var);
  nm.mean = Eigen::VectorXd::Zero(y.size());
  return nm;
}

Covariance PriorModel::gamma() const { return Covariance::from_matrix(covariance); }

Prior PriorModel::as_prior() const { return Prior::gaussian(gamma(), mean); }

double default_ridge(const SpMat& m) {
  double tr = 0.0;
  for (int i = 0; i < m.rows(); ++i) tr += m.coeff(i, i);
  return 1e-8 * tr / static_cast<double>(m.rows());
}

SpMat weighted_stiffness(const Mesh& mesh, const Eigen::VectorXd& k) {
  const int n = mesh.node_count();
  require(k.size() == n, ErrorKind::InvalidArgument, "diffusivity field length mismatch");
  require(k.allFinite() && k.minCoeff() > 0.0, ErrorKind::InvalidArgument, "diffusivity must be positive");
  std::vector<Eigen::Triplet<double>> trip;
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    const Eigen::Vector2d& p0 = mesh.nodes[t[0]];
    const Eigen::Vector2d& p1 = mesh.nodes[t[1]];
    const Eigen::Vector2d& p2 = mesh.nodes[t[2]];
    const double b[3] = {p1.y() - p2.y(), p2.y() - p0.y(), p0.y() - p1.y()};
    const double c[3] = {p2.x() - p1.x(), p0.x() - p2.x(), p1.x() - p0.x()};
    const double area = std::abs(mesh.signed_area(e));
    const double kbar = (k[t[0]] + k[t[1]] + k[t[2]]) / 3.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        trip.emplace_back(t[i], t[j], kbar * (b[i] * b[j] + c[i] * c[j]) / (4.0 * area));
  }
  SpMat s(n, n);
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

PriorModel smoothness_prior(const Mesh& mesh, const Eigen::VectorXd& k, double eps_pd,
                            const Eigen::VectorXd& mean) {
  return from_precision(PriorKind::PdeDiffusivity, weighted_stiffness(mesh, k), eps_pd,
                        mean_or_zero(mean, mesh.node_count()));
}

PriorModel mrf_prior(const Mesh& mesh, double weight, double eps_pd, const Eigen::VectorXd& mean) {
  require(weight > 0.0, ErrorKind::InvalidArgument, "MRF weight must be positive");
  const int n = mesh.node_count();
  const auto adj = mesh.adjacency();
  std::vector<Eigen::Triplet<double>> trip;
  for (int i = 0; i < n; ++i) {
    trip.emplace_back(i, i, weight * static_cast<double>(adj[i].size()));
    for (int j : adj[i]) trip.emplace_back(i, j, -weight);
  }
  SpMat l(n, n);
  l.setFromTriplets(trip.begin(), trip.end());
  return from_precision(PriorKind::Mrf, l, eps_pd, mean_or_zero(mean, n));
}

PriorModel database_prior(const std::vector<Eigen::VectorXd>& fields, double eps_pd) {
  require(fields.size() >= 2, ErrorKind::InvalidArgument, "database prior needs at least two fields");
  const int n = static_cast<int>(fields[0].size());
  Eigen::MatrixXd x(n, fields.size());
  for (std::size_t i = 0; i < fields.size(); ++i) {
    require(fields[i].size() == n, ErrorKind::InvalidArgument, "database fields differ in length");
    x.col(i) = fields[i];
  }
  const Eigen::VectorXd mean = x.rowwise().mean();
  const Eigen::MatrixXd centred = x.colwise() - mean;
  const Eigen::MatrixXd cov = centred * centred.transpose() / static_cast<double>(fields.size() - 1);
  return from_covariance(PriorKind::Database, cov, eps_pd, mean);
}

PriorModel correlation_prior(const Mesh& mesh, const Eigen::VectorXd& mean, double sigma,
                             double length, double eps_pd) {
  require(sigma > 0.0 && length > 0.0, ErrorKind::InvalidArgument,
          "correlation prior needs positive sigma and length");
  const int n = mesh.node_count();
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      cov(i, j) = sigma * sigma *
                  std::exp(-(mesh.nodes[i] - mesh.nodes[j]).squaredNorm() / (2.0 * length * length));
  return from_covariance(PriorKind::Correlation, cov, eps_pd, mean_or_zero(mean, n));
}

std::vector<Eigen::VectorXd> sample_prior(const PriorModel& prior, int n, std::uint64_t seed) {
  require(n >= 0, ErrorKind::InvalidArgument, "sample count must be >= 0");
  const int dim = prior.size();
  require(prior.covariance.rows() == dim && dim > 0, ErrorKind::InvalidCovariance, "prior is empty");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(prior.covariance);
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
      es.eigenvectors().transpose();
  std::vector<Eigen::VectorXd> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) out.push_back(prior.mean + root * normal_draw(dim, seed, i));
  return out;
}

Posterior gaussian_posterior(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                             const Covariance& gamma_x, const Covariance& gamma_e,
                             const Eigen::VectorXd& x_star, const Eigen::VectorXd& e_star) {
  require(a.rows() == y.size() && gamma_e.size() == a.rows() && gamma_x.size() == a.cols(),
          ErrorKind::InvalidArgument, "posterior shapes do not match");
  const Eigen::VectorXd xs = mean_or_zero(x_star, static_cast<int>(a.cols()));
  const Eigen::VectorXd es = mean_or_zero(e_star, static_cast<int>(a.rows()));
  const Eigen::MatrixXd gxy = gamma_x.matrix() * a.transpose();
  const Eigen::MatrixXd gy = a * gxy + gamma_e.matrix();
  const Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (gy + gy.transpose()));
  require(llt.info() == Eigen::Success, ErrorKind::InvalidCovariance, "data covariance is not SPD");
  Posterior post;
  post.mean = xs + gxy * llt.solve(y - a * xs - es);
  const Eigen::MatrixXd cov = gamma_x.matrix() - gxy * llt.solve(gxy.transpose());
  post.covariance = 0.5 * (cov + cov.transpose());
  return post;
}

NoiseModel ApproxErrorStats::corrected(const NoiseModel& noise) const {
  require(noise.gamma_e.size() == mean.size(), ErrorKind::InvalidArgument,
          "noise model and error statistics differ in size");
  NoiseModel out = noise;
  out.gamma_e = Covariance::from_matrix(noise.gamma_e.matrix() + covariance);
  out.mean = (noise.mean.size() ? noise.mean : Eigen::VectorXd::Zero(mean.size())) + mean;
  return out;
}

ApproxErrorStats approximation_error(const PriorModel& prior, const Model& fine, const Model& coarse,
                                     int n_samples, std::uint64_t seed) {
  require(n_samples >= 2, ErrorKind::InvalidArgument, "approximation error needs at least two samples");
  require(fine.parameter_count() == coarse.parameter_count() &&
              fine.data_count() == coarse.data_count() && prior.size() == coarse.parameter_count(),
          ErrorKind::InvalidArgument, "models and prior do not share parameter and data spaces");
  const auto draws = sample_prior(prior, n_samples, seed);
  Eigen::MatrixXd eps(fine.data_count(), n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const Eigen::VectorXd x = coarse.project(draws[i]);
    eps.col(i) = fine.forward(x) - coarse.forward(x);
  }
  ApproxErrorStats st;
  st.samples = n_samples;
  st.mean = eps.rowwise().mean();
  const Eigen::MatrixXd c = eps.colwise() - st.mean;
  st.covariance = c * c.transpose() / static_cast<double>(n_samples - 1);
  return st;
}

void write_approx_error(const ApproxErrorStats& stats, const std::string& mean_path,
                        const std::string& cov_path) {
  write_vector_csv(stats.mean, mean_path, "index", "mean");
  write_matrix_csv(stats.covariance, cov_path);
}

ApproxErrorStats read_approx_error(const std::string& mean_path, const std::string& cov_path) {
  ApproxErrorStats st;
  st.mean = read_vector_csv(mean_path);
  st.covariance = read_matrix_csv(cov_path);
  require(st.covariance.rows() == st.mean.size() && st.covariance.cols() == st.mean.size(),
          ErrorKind::InvalidData, "error covariance does not match the mean");
  return st;
}

MappedModel::MappedModel(std::shared_ptr<const Model> inner, SpMat map)
    : inner_(std::move(inner)), map_(std::move(map)) {
  require(inner_ != nullptr && map_.rows() == inner_->parameter_count(), ErrorKind::InvalidArgument,
          "map rows must match the inner parameter count");
}

Eigen::VectorXd MappedModel::forward(const Eigen::VectorXd& x) const { return inner_->forward(map_ * x); }

Eigen::MatrixXd MappedModel::jacobian(const Eigen::VectorXd& x) const {
  return inner_->jacobian(map_ * x) * map_;
}

Eigen::VectorXd MappedModel::adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  return map_.transpose() * inner_->adjoint(map_ * x, w);
}

bool MappedModel::admissible(const Eigen::VectorXd& x) const {
  return x.size() == map_.cols() && inner_->admissible(map_ * x);
}

CorrectedModel::CorrectedModel(std::shared_ptr<const Model> coarse, Eigen::VectorXd x_ref,
                               Eigen::VectorXd y_ref)
    : inner_(std::move(coarse)), x_ref_(std::move(x_ref)), y_ref_(std::move(y_ref)) {
  require(inner_ != nullptr && x_ref_.size() == inner_->parameter_count() &&
              y_ref_.size() == inner_->data_count(),
          ErrorKind::InvalidArgument, "reference pair does not match the model");
  offset_ = y_ref_ - inner_->forward(x_ref_);
}

Eigen::VectorXd CorrectedModel::forward(const Eigen::VectorXd& x) const {
  if (x.size() == x_ref_.size() && x == x_ref_) return y_ref_;
  return inner_->forward(x) + offset_;
}

}  // namespace difftomo
