#include "difftomo/laplace1d.hpp"

#include <cmath>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cd = std::complex<double>;

// Lanczos approximation, g = 7, valid for Re z >= 1/2.
cd log_gamma(cd z) {
  static const double p[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                             771.32342877765313,   -176.61502916214059,   12.507343278686905,
                             -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  z -= 1.0;
  cd x = p[0];
  for (int i = 1; i < 9; ++i) x += p[i] / (z + double(i));
  const cd t = z + 7.5;
  return 0.5 * std::log(2 * kPi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace

double LaplaceFilter::apply(double sigma) const {
  switch (kind) {
    case Kind::None:
      return 1.0 / sigma;
    case Kind::Tikhonov:
      return sigma / (sigma * sigma + alpha);
    case Kind::Truncation:
      return sigma * sigma >= alpha ? 1.0 / sigma : 0.0;
  }
  return 0.0;
}

LogGrid LogGrid::from_samples(const Eigen::VectorXd& x) {
  require(x.size() >= 2, ErrorKind::InvalidArgument, "log grid needs at least two samples");
  require(x.minCoeff() > 0.0, ErrorKind::InvalidArgument, "log grid samples must be positive");
  LogGrid g;
  g.n = int(x.size());
  g.t0 = std::log(x[0]);
  g.dt = (std::log(x[g.n - 1]) - g.t0) / (g.n - 1);
  require(g.dt > 0.0, ErrorKind::InvalidArgument, "log grid must be increasing");
  for (int j = 1; j < g.n; ++j) {
    const double step = std::log(x[j]) - std::log(x[j - 1]);
    require(std::abs(step - g.dt) <= 1e-6 * g.dt, ErrorKind::InvalidArgument, "samples are not log-spaced");
  }
  return g;
}

LogGrid LogGrid::span(double x_min, double x_max, int n) {
  require(x_min > 0.0 && x_max > x_min && n >= 2, ErrorKind::InvalidArgument, "bad log grid span");
  LogGrid g;
  g.n = n;
  g.t0 = std::log(x_min);
  g.dt = (std::log(x_max) - g.t0) / (n - 1);
  return g;
}

Eigen::VectorXd LogGrid::points() const {
  Eigen::VectorXd x(n);
  for (int j = 0; j < n; ++j) x[j] = std::exp(t0 + j * dt);
  return x;
}

Eigen::VectorXd LogGrid::frequencies() const {
  Eigen::VectorXd s(n);
  for (int m = 0; m < n; ++m) s[m] = 2 * kPi * (m - n / 2) / (n * dt);
  return s;
}

cd laplace_singular_value(double s) { return std::exp(log_gamma(cd(0.5, s))); }

double laplace_sigma_sq(double s) { return kPi / std::cosh(kPi * s); }

cd laplace_sigma_sq_quadrature(double s, const LogGrid& grid) {
  cd sum = 0.0;
  for (int j = 0; j < grid.n; ++j) {
    const double t = grid.t0 + j * grid.dt;
    const double w = (j == 0 || j == grid.n - 1) ? 0.5 : 1.0;
    // e^{t/2} / (1 + e^t) written to avoid overflow at large t
    const double mag = 1.0 / (std::exp(-0.5 * t) + std::exp(0.5 * t));
    sum += w * mag * std::exp(cd(0.0, s * t));
  }
  return sum * grid.dt;
}

LaplaceReconstruction laplace_invert_1d(const Eigen::VectorXd& k, const Eigen::VectorXd& phi,
                                        const LaplaceFilter& filter) {
  require(k.size() > 0, ErrorKind::InvalidArgument, "empty samples");
  return laplace_invert_1d(k, phi, filter, std::log(k[0]));
}

LaplaceReconstruction laplace_invert_1d(const Eigen::VectorXd& k, const Eigen::VectorXd& phi,
                                        const LaplaceFilter& filter, double x_t0) {
  require(k.size() > 0 && phi.size() > 0, ErrorKind::InvalidArgument, "empty samples");
  require(k.size() == phi.size(), ErrorKind::InvalidArgument, "k and phi sizes differ");
  require(filter.alpha >= 0.0 && std::isfinite(filter.alpha), ErrorKind::InvalidArgument,
          "regularizer must be bounded");
  const LogGrid kg = LogGrid::from_samples(k);
  const Eigen::VectorXd s = kg.frequencies();
  const int n = kg.n;
  const double ds = 2 * kPi / (n * kg.dt);
  const double norm = 1.0 / std::sqrt(2 * kPi);

  // c_m = <g_s, Phi>, then divide by the complex singular value with the filter
  std::vector<cd> b(n);
  for (int m = 0; m < n; ++m) {
    cd c = 0.0;
    for (int j = 0; j < n; ++j) {
      const double t = kg.t0 + j * kg.dt;
      c += std::exp(0.5 * t) * phi[j] * std::exp(cd(0.0, s[m] * t));
    }
    c *= kg.dt * norm;
    const cd gam = laplace_singular_value(s[m]);
    const double sigma = std::abs(gam);
    b[m] = sigma > 0.0 ? filter.apply(sigma) * (sigma / gam) * c : cd(0.0);
  }

  LaplaceReconstruction out;
  LogGrid xg = kg;
  xg.t0 = x_t0;
  out.x = xg.points();
  out.eta.resize(n);
  for (int l = 0; l < n; ++l) {
    const double u = xg.t0 + l * xg.dt;
    cd v = 0.0;
    for (int m = 0; m < n; ++m) v += b[m] * std::exp(cd(0.0, s[m] * u));
    out.eta[l] = (std::exp(-0.5 * u) * norm * ds * v).real();
  }
  return out;
}

Eigen::VectorXd laplace_forward_1d(const LogGrid& x_grid, const Eigen::VectorXd& eta, const LogGrid& k_grid) {
  require(eta.size() == x_grid.n, ErrorKind::InvalidArgument, "image size does not match its grid");
  require(x_grid.n == k_grid.n && std::abs(x_grid.dt - k_grid.dt) <= 1e-12 * x_grid.dt,
          ErrorKind::InvalidArgument, "image and data grids must share the log spacing");
  const int n = x_grid.n;
  const Eigen::VectorXd s = x_grid.frequencies();
  const double ds = 2 * kPi / (n * x_grid.dt);
  const double norm = 1.0 / std::sqrt(2 * kPi);
  std::vector<cd> bg(n);
  for (int m = 0; m < n; ++m) {
    cd b = 0.0;
    for (int l = 0; l < n; ++l) {
      const double u = x_grid.t0 + l * x_grid.dt;
      b += std::exp(0.5 * u) * eta[l] * std::exp(cd(0.0, -s[m] * u));
    }
    bg[m] = b * x_grid.dt * norm * laplace_singular_value(s[m]);
  }
  Eigen::VectorXd phi(n);
  for (int j = 0; j < n; ++j) {
    const double t = k_grid.t0 + j * k_grid.dt;
    cd v = 0.0;
    for (int m = 0; m < n; ++m) v += bg[m] * std::exp(cd(0.0, -s[m] * t));
    phi[j] = (std::exp(-0.5 * t) * norm * ds * v).real();
  }
  return phi;
}

}  // namespace difftomo
