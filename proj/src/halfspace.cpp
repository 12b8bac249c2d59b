#include "difftomo/halfspace.hpp"

#include <cmath>

#include <Eigen/LU>
#include <unsupported/Eigen/FFT>

#include "difftomo/error.hpp"
#include "difftomo/parallel.hpp"

namespace difftomo {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cd = std::complex<double>;

int signed_index(int m, int n) { return m < (n + 1) / 2 ? m : m - n; }

// In-place DFT along one axis of an n^dims array; sign +1 uses exp(+i ...).
void transform_axis(std::vector<cd>& v, int n, int dims, int axis, int sign) {
  Eigen::FFT<double> fft;
  std::size_t stride = 1;
  for (int d = axis + 1; d < dims; ++d) stride *= n;
  const std::size_t total = v.size();
  const std::size_t block = stride * n;
  std::vector<cd> line(n), out(n);
  for (std::size_t outer = 0; outer < total; outer += block)
    for (std::size_t inner = 0; inner < stride; ++inner) {
      for (int i = 0; i < n; ++i) line[i] = v[outer + inner + i * stride];
      if (sign > 0) {
        fft.inv(out, line);
        for (int i = 0; i < n; ++i) v[outer + inner + i * stride] = out[i] * double(n);
      } else {
        fft.fwd(out, line);
        for (int i = 0; i < n; ++i) v[outer + inner + i * stride] = out[i];
      }
    }
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& z) {
  const int nz = int(z.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(nz);
  for (int j = 0; j + 1 < nz; ++j) {
    const double h = z[j + 1] - z[j];
    w[j] += 0.5 * h;
    w[j + 1] += 0.5 * h;
  }
  return w;
}

}  // namespace

void HalfSpaceGrid::validate() const {
  require(n >= 2, ErrorKind::InvalidArgument, "lattice needs at least 2 x 2 points");
  require(spacing > 0.0, ErrorKind::InvalidArgument, "lattice spacing must be positive");
  require(z.size() >= 2, ErrorKind::InvalidArgument, "need at least two depth samples");
  require(z.minCoeff() >= 0.0, ErrorKind::DomainViolation, "depth samples must be non-negative");
  for (int j = 1; j < z.size(); ++j)
    require(z[j] > z[j - 1], ErrorKind::InvalidArgument, "depth samples must increase");
}

LatticeData LatticeData::zeros(int n) {
  require(n >= 1, ErrorKind::InvalidArgument, "lattice size must be positive");
  LatticeData d;
  d.n = n;
  d.values.assign(std::size_t(n) * n * n * n, cd(0.0));
  return d;
}

cd& LatticeData::at(int i1, int j1, int i2, int j2) {
  return values[((std::size_t(i1) * n + j1) * n + i2) * n + j2];
}

cd LatticeData::at(int i1, int j1, int i2, int j2) const {
  return values[((std::size_t(i1) * n + j1) * n + i2) * n + j2];
}

cd kappa_absorption(const Eigen::Vector2d& q1, const Eigen::Vector2d& q2, double z, cd k, double c) {
  const cd Q1 = mode_decay(q1.norm(), k), Q2 = mode_decay(q2.norm(), k);
  return c * std::exp(-(Q1 + Q2) * z);
}

cd kappa_diffusion(const Eigen::Vector2d& q1, const Eigen::Vector2d& q2, double z, cd k) {
  const cd Q1 = mode_decay(q1.norm(), k), Q2 = mode_decay(q2.norm(), k);
  return (Q1 * Q2 - q1.dot(q2)) * std::exp(-(Q1 + Q2) * z);
}

HalfSpaceImage fl_halfspace_invert(const LatticeData& data, const HalfSpaceGrid& grid, const Background& bg,
                                   const HalfSpaceOptions& opts) {
  grid.validate();
  require(opts.alpha > 0.0, ErrorKind::InvalidArgument, "alpha must be positive");
  require(data.n == grid.n && data.values.size() == std::size_t(grid.n) * grid.n * grid.n * grid.n,
          ErrorKind::InvalidData, "lattice data does not match the grid");
  require(bg.l_ext > 0.0 && bg.d0 > 0.0, ErrorKind::InvalidArgument,
          "half-space inversion needs positive l_ext and d0");
  const int n = grid.n;
  const double a = grid.spacing;
  const cd k = diffuse_wavenumber(bg);
  const Eigen::VectorXd& z = grid.z;
  const int nz = int(z.size());
  const Eigen::VectorXd w = trapezoid_weights(z);
  const int ncols = opts.absorption_only ? nz : 2 * nz;
  const double dq = 2 * kPi / (n * a);

  auto wavevector = [&](int mx, int my) {
    return Eigen::Vector2d(dq * signed_index(mx, n), dq * signed_index(my, n));
  };

  // psi = (D0/l)^2 (Q1 l + 1)(Q2 l + 1) * lattice transform of the data
  std::vector<cd> psi = data.values;
  for (int axis = 0; axis < 4; ++axis) transform_axis(psi, n, 4, axis, +1);
  const double a4 = a * a * a * a;
  const double norm = (bg.d0 / bg.l_ext) * (bg.d0 / bg.l_ext);
  for (int m1x = 0; m1x < n; ++m1x)
    for (int m1y = 0; m1y < n; ++m1y) {
      const cd f1 = mode_decay(wavevector(m1x, m1y).norm(), k) * bg.l_ext + 1.0;
      for (int m2x = 0; m2x < n; ++m2x)
        for (int m2y = 0; m2y < n; ++m2y) {
          const cd f2 = mode_decay(wavevector(m2x, m2y).norm(), k) * bg.l_ext + 1.0;
          psi[((std::size_t(m1x) * n + m1y) * n + m2x) * n + m2y] *= a4 * norm * f1 * f2;
        }
    }

  // alpha scale from the zero-frequency absorption block
  double scale = 0.0;
  {
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(nz);
    for (int px = 0; px < n; ++px)
      for (int py = 0; py < n; ++py) {
        const Eigen::Vector2d q1 = wavevector(px, py);
        const Eigen::Vector2d q2 = wavevector((n - px) % n, (n - py) % n);
        for (int j = 0; j < nz; ++j) diag[j] += std::norm(kappa_absorption(q1, q2, z[j], k, bg.c)) * w[j];
      }
    scale = diag.maxCoeff();
  }
  const double alpha = opts.alpha * scale;

  // per object frequency: rows p = q1, q2 = Q - q1
  std::vector<cd> mu_t(std::size_t(n) * n * nz), d_t(std::size_t(n) * n * nz);
  parallel_for(n * n, [&](int qi) {
    const int Mx = qi / n, My = qi % n;
    std::vector<int> rows;
    rows.reserve(n * n);
    const double zmin = z[0];
    for (int p = 0; p < n * n; ++p) {
      const int px = p / n, py = p % n;
      const Eigen::Vector2d q1 = wavevector(px, py);
      const Eigen::Vector2d q2 = wavevector(((Mx - px) % n + n) % n, ((My - py) % n + n) % n);
      if (std::abs(kappa_absorption(q1, q2, zmin, k, 1.0)) >= opts.p_cutoff) rows.push_back(p);
    }
    const int nr = int(rows.size());
    Eigen::MatrixXcd B(nr, ncols);
    Eigen::VectorXcd rhs(nr);
    for (int r = 0; r < nr; ++r) {
      const int px = rows[r] / n, py = rows[r] % n;
      const int m2x = ((Mx - px) % n + n) % n, m2y = ((My - py) % n + n) % n;
      const Eigen::Vector2d q1 = wavevector(px, py), q2 = wavevector(m2x, m2y);
      for (int j = 0; j < nz; ++j) {
        B(r, j) = kappa_absorption(q1, q2, z[j], k, bg.c);
        if (!opts.absorption_only) B(r, nz + j) = kappa_diffusion(q1, q2, z[j], k);
      }
      rhs[r] = psi[((std::size_t(px) * n + py) * n + m2x) * n + m2y];
    }
    Eigen::VectorXd wc(ncols);
    wc.head(nz) = w;
    if (!opts.absorption_only) wc.tail(nz) = w;

    Eigen::VectorXcd x;
    if (opts.form == HalfSpaceOptions::Form::Normal) {
      Eigen::MatrixXcd N = B.adjoint() * B * wc.asDiagonal();
      N.diagonal().array() += alpha;
      x = N.partialPivLu().solve(B.adjoint() * rhs);
    } else {
      Eigen::MatrixXcd M = B * wc.asDiagonal() * B.adjoint();
      M.diagonal().array() += alpha;
      x = B.adjoint() * M.partialPivLu().solve(rhs);
    }
    for (int j = 0; j < nz; ++j) {
      mu_t[(std::size_t(j) * n + Mx) * n + My] = x[j];
      d_t[(std::size_t(j) * n + Mx) * n + My] = opts.absorption_only ? cd(0.0) : x[nz + j];
    }
  });

  // inverse transverse transform: sum_Q exp(-i Q rho) / (n a)^2
  HalfSpaceImage img;
  img.n = n;
  img.z = z;
  img.mu_a.assign(std::size_t(n) * n * nz, 0.0);
  img.diff.assign(std::size_t(n) * n * nz, 0.0);
  const double inv_area = 1.0 / ((n * a) * (n * a));
  for (int j = 0; j < nz; ++j) {
    std::vector<cd> sm(mu_t.begin() + std::size_t(j) * n * n, mu_t.begin() + std::size_t(j + 1) * n * n);
    std::vector<cd> sd(d_t.begin() + std::size_t(j) * n * n, d_t.begin() + std::size_t(j + 1) * n * n);
    for (int axis = 0; axis < 2; ++axis) {
      transform_axis(sm, n, 2, axis, -1);
      transform_axis(sd, n, 2, axis, -1);
    }
    for (int i = 0; i < n * n; ++i) {
      img.mu_a[std::size_t(j) * n * n + i] = sm[i].real() * inv_area;
      img.diff[std::size_t(j) * n * n + i] = sd[i].real() * inv_area;
    }
  }
  return img;
}

}  // namespace difftomo
