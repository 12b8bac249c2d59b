#include "difftomo/broken_ray.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "difftomo/error.hpp"
#include "difftomo/parallel.hpp"

namespace difftomo {

namespace {

constexpr double kPi = 3.14159265358979323846;
using cd = std::complex<double>;

double bilinear(const Eigen::MatrixXd& f, const SlabGrid& g, double dz, double y, double z) {
  const double period = g.ny * g.dy;
  double yy = std::fmod(y, period);
  if (yy < 0) yy += period;
  const double fy = yy / g.dy;
  int i0 = int(std::floor(fy));
  const double ty = fy - i0;
  i0 %= g.ny;
  const int i1 = (i0 + 1) % g.ny;
  const double fz = std::clamp(z / dz, 0.0, double(g.nz - 1));
  int j0 = std::min(int(std::floor(fz)), g.nz - 2);
  const double tz = fz - j0;
  return (1 - ty) * ((1 - tz) * f(i0, j0) + tz * f(i0, j0 + 1)) + ty * ((1 - tz) * f(i1, j0) + tz * f(i1, j0 + 1));
}

// Exact integral of the bilinear interpolant along a straight segment: split
// at grid-line crossings, where it is quadratic in the arc parameter.
double segment(const Eigen::MatrixXd& f, const SlabGrid& g, double dz, double y0, double z0, double y1, double z1) {
  const double len = std::hypot(y1 - y0, z1 - z0);
  if (len == 0.0) return 0.0;
  std::vector<double> cuts = {0.0, 1.0};
  auto add_crossings = [&](double a, double b, double step) {
    if (a == b) return;
    const double lo = std::min(a, b), hi = std::max(a, b);
    for (double m = std::ceil(lo / step); m * step < hi; m += 1.0) {
      const double t = (m * step - a) / (b - a);
      if (t > 0.0 && t < 1.0) cuts.push_back(t);
    }
  };
  add_crossings(y0, y1, g.dy);
  add_crossings(z0, z1, dz);
  std::sort(cuts.begin(), cuts.end());
  double s = 0.0;
  for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
    const double ta = cuts[c], tb = cuts[c + 1];
    if (tb - ta <= 0.0) continue;
    const double tm = 0.5 * (ta + tb);
    auto at = [&](double t) { return bilinear(f, g, dz, y0 + t * (y1 - y0), z0 + t * (z1 - z0)); };
    s += (tb - ta) / 6.0 * (at(ta) + 4.0 * at(tm) + at(tb));
  }
  return s * len;
}

// d/dj with fourth-order stencils, one-sided near the ends
cd diff_index(const std::vector<cd>& r, int j) {
  const int n = int(r.size());
  if (j >= 2 && j + 2 < n) return (-r[j + 2] + 8.0 * r[j + 1] - 8.0 * r[j - 1] + r[j - 2]) / 12.0;
  if (j == 0) return (-25.0 * r[0] + 48.0 * r[1] - 36.0 * r[2] + 16.0 * r[3] - 3.0 * r[4]) / 12.0;
  if (j == 1) return (-3.0 * r[0] - 10.0 * r[1] + 18.0 * r[2] - 6.0 * r[3] + r[4]) / 12.0;
  if (j == n - 1)
    return (25.0 * r[n - 1] - 48.0 * r[n - 2] + 36.0 * r[n - 3] - 16.0 * r[n - 4] + 3.0 * r[n - 5]) / 12.0;
  return (3.0 * r[n - 1] + 10.0 * r[n - 2] - 18.0 * r[n - 3] + 6.0 * r[n - 4] - r[n - 5]) / 12.0;
}

// int_{z0}^{z0+h} exp(i b z) (linear interpolant of F0, F1) dz
cd filon_step(double b, double z0, double h, cd f0, cd f1) {
  const double bh = b * h;
  if (std::abs(bh) < 1e-4) {
    const cd e0 = std::exp(cd(0, b * z0)), e1 = std::exp(cd(0, b * (z0 + h)));
    return 0.5 * h * (e0 * f0 + e1 * f1);
  }
  const cd ib(0.0, b);
  const cd e = std::exp(cd(0, bh));
  const cd slope = (f1 - f0) / h;
  const cd part = f0 * (e - 1.0) / ib + slope * (h * e / ib - (e - 1.0) / (ib * ib));
  return std::exp(cd(0, b * z0)) * part;
}

}  // namespace

void BrokenRayGeometry::validate() const {
  require(width > 0.0, ErrorKind::InvalidGeometry, "slab width must be positive");
  require(theta > 0.0 && theta < kPi / 2, ErrorKind::InvalidGeometry, "scattering angle must lie in (0, pi/2)");
}

void SlabGrid::validate() const {
  require(ny >= 4 && nz >= 5, ErrorKind::InvalidArgument, "slab grid needs ny >= 4 and nz >= 5");
  require(dy > 0.0, ErrorKind::InvalidArgument, "dy must be positive");
}

double broken_ray_forward(const Eigen::MatrixXd& f, const SlabGrid& grid, const BrokenRayGeometry& geom, double y1,
                          double y2) {
  geom.validate();
  grid.validate();
  require(f.rows() == grid.ny && f.cols() == grid.nz, ErrorKind::InvalidArgument, "image does not match grid");
  const double L = geom.width;
  const double zr = L - (y2 - y1) / std::tan(geom.theta);
  require(zr >= -1e-12 * L && zr <= L * (1 + 1e-12), ErrorKind::InvalidGeometry,
          "rays do not intersect inside the slab");
  const double z = std::clamp(zr, 0.0, L);
  const double dz = grid.dz(geom);
  return segment(f, grid, dz, y1, 0.0, y1, z) + segment(f, grid, dz, y1, z, y2, L);
}

Eigen::MatrixXd broken_ray_measure(const Eigen::MatrixXd& f, const SlabGrid& grid, const BrokenRayGeometry& geom,
                                   int oversample) {
  geom.validate();
  grid.validate();
  require(oversample >= 1, ErrorKind::InvalidArgument, "oversampling factor must be positive");
  const int nf = (grid.nz - 1) * oversample + 1;
  Eigen::MatrixXd out(grid.ny * oversample, nf);
  const double dz = grid.dz(geom) / oversample, t = std::tan(geom.theta);
  parallel_for(grid.ny * oversample, [&](int i) {
    for (int j = 0; j < nf; ++j) {
      const double y1 = i * grid.dy / oversample;
      out(i, j) = broken_ray_forward(f, grid, geom, y1, y1 + (geom.width - j * dz) * t);
    }
  });
  return out;
}

Eigen::MatrixXd broken_ray_invert(const Eigen::MatrixXd& data, const SlabGrid& grid, const BrokenRayGeometry& geom,
                                  double alpha, double scale) {
  geom.validate();
  grid.validate();
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be non-negative");
  require(data.cols() >= grid.nz && (data.cols() - 1) % (grid.nz - 1) == 0, ErrorKind::InvalidData,
          "measurements must be (ny m) x ((nz - 1) m + 1)");
  const int nz = int(data.cols());
  const int over = (nz - 1) / (grid.nz - 1);
  require(data.rows() == Eigen::Index(grid.ny) * over, ErrorKind::InvalidData,
          "measurements must be (ny m) x ((nz - 1) m + 1)");
  const int ny = grid.ny * over;
  const double dy = grid.dy / over;
  const double dz = grid.dz(geom) / over;
  const double h_off = dz * std::tan(geom.theta);  // offset decreases by h_off per depth sample
  const double cot = 1.0 / std::tan(0.5 * geom.theta);

  // transverse transform with exp(+i k y1)
  Eigen::FFT<double> fft;
  Eigen::MatrixXcd rhat(ny, nz);
  {
    std::vector<cd> line(ny), out(ny);
    for (int j = 0; j < nz; ++j) {
      for (int i = 0; i < ny; ++i) line[i] = data(i, j);
      fft.inv(out, line);
      for (int i = 0; i < ny; ++i) rhat(i, j) = out[i] * double(ny) * dy;
    }
  }

  Eigen::MatrixXcd fhat = Eigen::MatrixXcd::Zero(ny, nz);
  parallel_for(ny, [&](int m) {
    if (2 * m == ny) return;  // Nyquist mode has no real counterpart
    const int ms = m < (ny + 1) / 2 ? m : m - ny;
    const double k = 2 * kPi * ms / (ny * dy);
    std::vector<cd> r(nz), F(nz);
    for (int j = 0; j < nz; ++j) r[j] = rhat(m, j);
    for (int j = 0; j < nz; ++j) F[j] = -diff_index(r, j) / h_off + cd(0, k) * r[j];
    const double beta = k * cot;
    const double kf = k / (1.0 + alpha * k * k);
    cd acc = 0.0;
    for (int j = 0; j < nz; ++j) {
      if (j > 0) acc += filon_step(beta, (j - 1) * dz, dz, F[j - 1], F[j]);
      const double z = j * dz;
      fhat(m, j) = cot * F[j] - cd(0, kf) * cot * cot * std::exp(cd(0, -beta * z)) * acc;
    }
  });

  Eigen::MatrixXd f(grid.ny, grid.nz);
  std::vector<cd> line(ny), out(ny);
  for (int j = 0; j < grid.nz; ++j) {
    for (int m = 0; m < ny; ++m) line[m] = fhat(m, j * over);
    fft.fwd(out, line);
    for (int i = 0; i < grid.ny; ++i) f(i, j) = scale * out[std::size_t(i) * over].real() / (ny * dy);
  }
  return f;
}

double broken_ray_calibrate(const SlabGrid& grid, const BrokenRayGeometry& geom, double alpha, int oversample) {
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(grid.ny, grid.nz);
  const Eigen::MatrixXd rec =
      broken_ray_invert(broken_ray_measure(one, grid, geom, oversample), grid, geom, alpha);
  const int lo = int(std::ceil(0.1 * (grid.nz - 1))), hi = int(std::floor(0.9 * (grid.nz - 1)));
  const double mean = rec.middleCols(lo, hi - lo + 1).mean();
  require(std::abs(mean) > 0.0, ErrorKind::SingularEvaluation, "calibration produced a zero image");
  return 1.0 / mean;
}

}  // namespace difftomo
