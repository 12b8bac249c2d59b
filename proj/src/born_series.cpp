#include "difftomo/born_series.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Integral of the kernel over a ball with the voxel's volume, centred on the pole.
cdouble self_cell(cdouble k, double d0, double volume) {
  const double a = std::cbrt(3.0 * volume / (4.0 * kPi));
  if (std::abs(k * a) < 1e-6) return a * a / (2.0 * d0);
  return (1.0 - (1.0 + k * a) * std::exp(-k * a)) / (d0 * k * k);
}

}  // namespace

void BornGrid::validate() const {
  require(!sources.empty() && !detectors.empty(), ErrorKind::InvalidArgument, "need sources and detectors");
  require(!voxels.empty(), ErrorKind::InvalidArgument, "need at least one voxel");
  require(voxel_size > 0.0, ErrorKind::InvalidArgument, "voxel size must be positive");
  const double tol = 0.5 * voxel_size;
  for (const auto& v : voxels) {
    for (const auto& s : sources)
      require((s - v).norm() > tol, ErrorKind::InvalidGeometry, "source inside the voxel region");
    for (const auto& d : detectors)
      require((d - v).norm() > tol, ErrorKind::InvalidGeometry, "detector inside the voxel region");
  }
}

BornGrid BornGrid::cube(int per_side, double voxel_size, const Point3& centre) {
  require(per_side >= 1, ErrorKind::InvalidArgument, "need at least one voxel per side");
  BornGrid g;
  g.voxel_size = voxel_size;
  const double off = 0.5 * (per_side - 1);
  for (int i = 0; i < per_side; ++i)
    for (int j = 0; j < per_side; ++j)
      for (int l = 0; l < per_side; ++l)
        g.voxels.push_back(centre + voxel_size * Point3(i - off, j - off, l - off));
  return g;
}

BornOperator::BornOperator(const BornKernels& kernels, const BornGrid& grid, double truncation) {
  grid.validate();
  require(truncation >= 0.0 && truncation < 1.0, ErrorKind::InvalidArgument, "truncation must lie in [0, 1)");
  truncation_ = truncation;
  volume_ = grid.voxel_size * grid.voxel_size * grid.voxel_size;
  const int ns = int(grid.sources.size()), nd = int(grid.detectors.size()), nv = int(grid.voxels.size());
  a_.resize(ns, nv);
  b_.resize(nv, nd);
  t_.resize(nv, nv);
  for (int v = 0; v < nv; ++v) {
    for (int s = 0; s < ns; ++s) a_(s, v) = kernels.green(grid.sources[s], grid.voxels[v]);
    for (int d = 0; d < nd; ++d) b_(v, d) = kernels.green(grid.voxels[v], grid.detectors[d]);
    for (int w = 0; w < nv; ++w)
      t_(v, w) = v == w ? self_cell(kernels.k, kernels.d0, volume_)
                        : kernels.green(grid.voxels[v], grid.voxels[w]) * volume_;
  }
  k1_.resize(Eigen::Index(ns) * nd, nv);
  for (int v = 0; v < nv; ++v)
    for (int s = 0; s < ns; ++s)
      for (int d = 0; d < nd; ++d) k1_(Eigen::Index(s) * nd + d, v) = a_(s, v) * b_(v, d) * volume_;

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(k1_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cut = truncation * (sv.size() ? sv[0] : 0.0);
  rank_ = 0;
  while (rank_ < sv.size() && sv[rank_] > cut && sv[rank_] > 0.0) ++rank_;
  pinv_ = svd.matrixV().leftCols(rank_) * sv.head(rank_).cwiseInverse().asDiagonal() *
          svd.matrixU().leftCols(rank_).adjoint();
}

Eigen::MatrixXcd BornOperator::apply_k1(const Eigen::VectorXcd& eta) const {
  require(eta.size() == voxels(), ErrorKind::InvalidArgument, "eta size mismatch");
  return a_ * (volume_ * eta).asDiagonal() * b_;
}

Eigen::MatrixXcd BornOperator::apply_k2(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) const {
  require(a.size() == voxels() && b.size() == voxels(), ErrorKind::InvalidArgument, "eta size mismatch");
  return -(a_ * (volume_ * a).asDiagonal() * t_ * b.asDiagonal() * b_);
}

Eigen::MatrixXcd BornOperator::apply_k3(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b,
                                        const Eigen::VectorXcd& c) const {
  require(a.size() == voxels() && b.size() == voxels() && c.size() == voxels(), ErrorKind::InvalidArgument,
          "eta size mismatch");
  return a_ * (volume_ * a).asDiagonal() * t_ * b.asDiagonal() * t_ * c.asDiagonal() * b_;
}

Eigen::VectorXcd BornOperator::apply_pinv(const Eigen::MatrixXcd& data) const {
  require(data.rows() == sources() && data.cols() == detectors(), ErrorKind::InvalidData,
          "data must be sources x detectors");
  Eigen::VectorXcd flat(data.size());
  for (int s = 0; s < sources(); ++s)
    for (int d = 0; d < detectors(); ++d) flat[Eigen::Index(s) * detectors() + d] = data(s, d);
  return pinv_ * flat;
}

Eigen::MatrixXcd BornOperator::exact_data(const Eigen::VectorXcd& eta) const {
  require(eta.size() == voxels(), ErrorKind::InvalidArgument, "eta size mismatch");
  const int nv = voxels();
  Eigen::MatrixXcd lhs = Eigen::MatrixXcd::Identity(nv, nv) + t_ * eta.asDiagonal();
  Eigen::PartialPivLU<Eigen::MatrixXcd> lu(lhs);
  const Eigen::MatrixXcd field = lu.solve(a_.transpose());  // nv x ns
  return field.transpose() * (volume_ * eta).asDiagonal() * b_;
}

SeriesState inverse_born_series(const Eigen::MatrixXcd& data, const BornOperator& op, int order) {
  require(order >= 1, ErrorKind::InvalidArgument, "order must be at least 1");
  if (order > 3) fail(ErrorKind::UnsupportedOrder, "inverse series is implemented to third order");
  SeriesState st;
  st.order = order;
  st.rank = op.rank();
  st.truncation = op.truncation();

  const Eigen::VectorXcd e1 = op.apply_pinv(data);
  st.terms.push_back(e1);
  Eigen::VectorXcd e2;
  if (order >= 2) {
    e2 = -op.apply_pinv(op.apply_k2(e1, e1));
    st.terms.push_back(e2);
  }
  if (order >= 3) {
    // K3 = -(K2 K1 x K2 + K2 K2 x K1 + K1 K3) (K1 x K1 x K1), with K2(u x v) = -K1 K2(K1 u x K1 v)
    const Eigen::VectorXcd p1 = op.apply_pinv(op.apply_k1(e1));
    const Eigen::VectorXcd p2 = op.apply_pinv(op.apply_k2(e1, e1));
    const Eigen::VectorXcd e3 = op.apply_pinv(op.apply_k2(p1, p2)) + op.apply_pinv(op.apply_k2(p2, p1)) -
                                op.apply_pinv(op.apply_k3(e1, e1, e1));
    st.terms.push_back(e3);
  }
  Eigen::VectorXcd sum = Eigen::VectorXcd::Zero(e1.size());
  for (const auto& t : st.terms) {
    sum += t;
    st.partial_sums.push_back(sum);
  }
  return st;
}

ConvergenceConstants convergence_radius(double k, double a, double boundary_distance, double boundary_area) {
  require(k > 0.0 && a > 0.0, ErrorKind::InvalidArgument, "k and a must be positive");
  require(boundary_distance > 0.0 && boundary_area >= 0.0, ErrorKind::InvalidArgument,
          "boundary distance must be positive and area non-negative");
  ConvergenceConstants c;
  c.k = k;
  c.a = a;
  c.boundary_distance = boundary_distance;
  c.boundary_area = boundary_area;
  // e^{-ka/2} sqrt(sinh(ka)) written without overflow for large ka
  c.mu = k * k * std::sqrt(-std::expm1(-2.0 * k * a) / (8.0 * kPi * k));
  if (std::isinf(boundary_distance)) {
    c.nu = 0.0;
  } else {
    const double ball = 4.0 / 3.0 * kPi * a * a * a;
    const double r = 4.0 * kPi * boundary_distance;
    c.nu = k * k * boundary_area * std::sqrt(ball) * std::exp(-2.0 * k * boundary_distance) / (r * r);
  }
  c.radius = 1.0 / (c.mu + c.nu);
  return c;
}

}  // namespace difftomo
