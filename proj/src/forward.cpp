#include "difftomo/forward.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

using Trip = Eigen::Triplet<double>;

// Integral of u_k u_l u_m over a triangle of unit area, times 60.
double triple_coef(int k, int l, int m) {
  if (k == l && l == m) return 6.0;
  if (k == l || l == m || k == m) return 2.0;
  return 1.0;
}

ElementData element_data(const Mesh& mesh, int e) {
  const auto& t = mesh.triangles[e];
  ElementData d;
  double b[3], c[3];
  for (int i = 0; i < 3; ++i) {
    const auto& pj = mesh.nodes[t[(i + 1) % 3]];
    const auto& pk = mesh.nodes[t[(i + 2) % 3]];
    b[i] = pj.y() - pk.y();
    c[i] = pk.x() - pj.x();
  }
  d.area = mesh.signed_area(e);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) d.stiffness(i, j) = (b[i] * b[j] + c[i] * c[j]) / (4.0 * d.area);
  return d;
}

double inv_two_zeta(double zeta) {
  return std::isinf(zeta) ? 0.0 : 1.0 / (2.0 * zeta);
}

}  // namespace

SpMatC SystemMatrix::compose(const ParamField& params) const {
  params.validate(n);
  std::vector<Eigen::Triplet<cdouble>> trip;
  trip.reserve(triangles.size() * 9 + surface.nonZeros());
  for (std::size_t e = 0; e < triangles.size(); ++e) {
    const auto& t = triangles[e];
    const auto& el = elements[e];
    const double dbar = (params.diff[t[0]] + params.diff[t[1]] + params.diff[t[2]]) / 3.0;
    for (int l = 0; l < 3; ++l)
      for (int m = 0; m < 3; ++m) {
        double absorb = 0.0;
        for (int k = 0; k < 3; ++k) absorb += params.mu_a[t[k]] * triple_coef(k, l, m);
        absorb *= params.c * el.area / 60.0;
        const double mass_lm = el.area / 12.0 * (l == m ? 2.0 : 1.0);
        trip.emplace_back(t[l], t[m], cdouble(dbar * el.stiffness(l, m) + absorb, omega * mass_lm));
      }
  }
  for (int k = 0; k < surface.outerSize(); ++k)
    for (SpMat::InnerIterator it(surface, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), cdouble(it.value(), 0.0));
  SpMatC K(n, n);
  K.setFromTriplets(trip.begin(), trip.end());
  return K;
}

SystemMatrix assemble_system(const Mesh& mesh, const ParamField& params, double omega, double zeta,
                             bool with_derivatives) {
  const int n = mesh.node_count();
  params.validate(n);
  require(std::isfinite(omega) && omega >= 0.0, ErrorKind::InvalidArgument,
          "omega must be non-negative");
  require(zeta > 0.0, ErrorKind::InvalidArgument, "zeta must be positive");

  SystemMatrix sys;
  sys.n = n;
  sys.omega = omega;
  sys.zeta = zeta;
  sys.c = params.c;
  sys.triangles = mesh.triangles;
  sys.elements.resize(mesh.element_count());

  std::vector<Trip> mass_t;
  std::vector<std::vector<Trip>> dmu, dd;
  if (with_derivatives) {
    dmu.resize(n);
    dd.resize(n);
  }
  for (int e = 0; e < mesh.element_count(); ++e) {
    const auto& t = mesh.triangles[e];
    sys.elements[e] = element_data(mesh, e);
    const auto& el = sys.elements[e];
    for (int l = 0; l < 3; ++l)
      for (int m = 0; m < 3; ++m) {
        mass_t.emplace_back(t[l], t[m], el.area / 12.0 * (l == m ? 2.0 : 1.0));
        if (!with_derivatives) continue;
        for (int k = 0; k < 3; ++k) {
          dmu[t[k]].emplace_back(t[l], t[m], el.area * triple_coef(k, l, m) / 60.0);
          dd[t[k]].emplace_back(t[l], t[m], el.stiffness(l, m) / 3.0);
        }
      }
  }
  sys.mass.resize(n, n);
  sys.mass.setFromTriplets(mass_t.begin(), mass_t.end());

  std::vector<Trip> bm_t;
  for (const auto& be : mesh.boundary_edges) {
    const double len = (mesh.nodes[be.b] - mesh.nodes[be.a]).norm();
    bm_t.emplace_back(be.a, be.a, len / 3.0);
    bm_t.emplace_back(be.b, be.b, len / 3.0);
    bm_t.emplace_back(be.a, be.b, len / 6.0);
    bm_t.emplace_back(be.b, be.a, len / 6.0);
  }
  sys.boundary_mass.resize(n, n);
  sys.boundary_mass.setFromTriplets(bm_t.begin(), bm_t.end());
  sys.surface = sys.boundary_mass * (params.c * inv_two_zeta(zeta));

  if (with_derivatives) {
    sys.deriv_mu.resize(n);
    sys.deriv_d.resize(n);
    for (int k = 0; k < n; ++k) {
      sys.deriv_mu[k].resize(n, n);
      sys.deriv_mu[k].setFromTriplets(dmu[k].begin(), dmu[k].end());
      sys.deriv_d[k].resize(n, n);
      sys.deriv_d[k].setFromTriplets(dd[k].begin(), dd[k].end());
    }
  }
  sys.k_matrix = sys.compose(params);
  return sys;
}

void SourceDetectorLayout::validate(const Mesh& mesh) const {
  require(!sources.empty() && !detectors.empty(), ErrorKind::InvalidArgument,
          "layout needs at least one source and one detector");
  const auto on_boundary = mesh.boundary_mask();
  auto check = [&](const Eigen::VectorXd& p, const char* what) {
    require(p.size() == mesh.node_count(), ErrorKind::InvalidArgument,
            std::string(what) + " profile has wrong length");
    for (int i = 0; i < p.size(); ++i) {
      require(std::isfinite(p[i]) && p[i] >= 0.0, ErrorKind::InvalidArgument,
              std::string(what) + " profile must be non-negative");
      require(p[i] == 0.0 || on_boundary[i], ErrorKind::InvalidArgument,
              std::string(what) + " profile must live on boundary nodes");
    }
    require(std::abs(p.sum() - 1.0) < 1e-9, ErrorKind::InvalidArgument,
            std::string(what) + " profile must sum to one");
  };
  for (const auto& s : sources) check(s, "source");
  for (const auto& d : detectors) check(d, "detector");
}

Eigen::VectorXd boundary_profile(const Mesh& mesh, double angle, double half_width) {
  require(half_width > 0.0, ErrorKind::InvalidArgument, "profile width must be positive");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(mesh.node_count());
  const auto bn = mesh.boundary_nodes();
  int nearest = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int v : bn) {
    const double a = std::atan2(mesh.nodes[v].y(), mesh.nodes[v].x());
    double d = std::remainder(a - angle, 2.0 * std::numbers::pi);
    d = std::abs(d);
    w[v] = std::max(0.0, 1.0 - d / half_width);
    if (d < best) best = d, nearest = v;
  }
  if (w.sum() <= 0.0) w[nearest] = 1.0;
  return w / w.sum();
}

SourceDetectorLayout ring_layout(const Mesh& mesh, int n_sources, int n_detectors,
                                 double half_width, double offset) {
  require(n_sources > 0 && n_detectors > 0, ErrorKind::InvalidArgument,
          "source and detector counts must be positive");
  SourceDetectorLayout L;
  const double tau = 2.0 * std::numbers::pi;
  for (int s = 0; s < n_sources; ++s)
    L.sources.push_back(boundary_profile(mesh, offset + tau * s / n_sources, half_width));
  for (int m = 0; m < n_detectors; ++m)
    L.detectors.push_back(boundary_profile(mesh, offset + tau * (m + 0.5) / n_detectors, half_width));
  return L;
}

struct ForwardFactor::Impl {
  Eigen::SparseLU<SpMatC, Eigen::COLAMDOrdering<int>> lu;
};

ForwardFactor::ForwardFactor(const SpMatC& k) : impl_(std::make_unique<Impl>()) {
  impl_->lu.analyzePattern(k);
  impl_->lu.factorize(k);
  require(impl_->lu.info() == Eigen::Success, ErrorKind::SingularSystem,
          "system matrix factorization failed");
  // probe the conditioning: a singular K shows up as a huge solution
  const int n = static_cast<int>(k.rows());
  Eigen::VectorXcd b(n);
  for (int i = 0; i < n; ++i) b[i] = cdouble(1.0 + 0.5 * std::sin(1.7 * i), 0.0);
  Eigen::VectorXcd x = impl_->lu.solve(b);
  double knorm = 0.0;
  for (int j = 0; j < k.outerSize(); ++j) {
    double col = 0.0;
    for (SpMatC::InnerIterator it(k, j); it; ++it) col += std::abs(it.value());
    knorm = std::max(knorm, col);
  }
  const double growth = x.cwiseAbs().sum() * knorm / b.cwiseAbs().sum();
  require(x.allFinite() && growth < 1e13, ErrorKind::SingularSystem,
          "system matrix is numerically singular");
}

ForwardFactor::~ForwardFactor() = default;
ForwardFactor::ForwardFactor(ForwardFactor&&) noexcept = default;
ForwardFactor& ForwardFactor::operator=(ForwardFactor&&) noexcept = default;

Eigen::MatrixXcd ForwardFactor::solve(const Eigen::MatrixXcd& rhs) const {
  Eigen::MatrixXcd x = impl_->lu.solve(rhs);
  require(x.allFinite(), ErrorKind::SingularSystem, "non-finite solution");
  return x;
}

Eigen::VectorXd profile_density(const SystemMatrix& sys, const Eigen::VectorXd& profile) {
  const Eigen::VectorXd lumped = sys.boundary_mass * Eigen::VectorXd::Ones(sys.n);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(sys.n);
  for (int v = 0; v < sys.n; ++v)
    if (lumped[v] > 0.0) d[v] = profile[v] / lumped[v];
  return d;
}

Eigen::MatrixXcd load_vectors(const SystemMatrix& sys, const SourceDetectorLayout& layout) {
  Eigen::MatrixXcd q(sys.n, layout.n_sources());
  const double f = inv_two_zeta(sys.zeta);
  for (int s = 0; s < layout.n_sources(); ++s)
    q.col(s) = (sys.boundary_mass * profile_density(sys, layout.sources[s]) * f).cast<cdouble>();
  return q;
}

Eigen::MatrixXd measurement_matrix(const SystemMatrix& sys, const SourceDetectorLayout& layout) {
  Eigen::MatrixXd M(layout.n_detectors(), sys.n);
  const double f = sys.c * inv_two_zeta(sys.zeta);
  for (int m = 0; m < layout.n_detectors(); ++m)
    M.row(m) = (sys.boundary_mass * profile_density(sys, layout.detectors[m])).transpose() * f;
  return M;
}

Eigen::MatrixXcd solve_forward(const SystemMatrix& sys, const ForwardFactor& factor,
                               const SourceDetectorLayout& layout) {
  return factor.solve(load_vectors(sys, layout));
}

Eigen::MatrixXcd solve_forward(const SystemMatrix& sys, const SourceDetectorLayout& layout) {
  ForwardFactor f(sys.k_matrix);
  return solve_forward(sys, f, layout);
}

Eigen::MatrixXcd measure_boundary(const SystemMatrix& sys, const SourceDetectorLayout& layout,
                                  const Eigen::MatrixXcd& fields) {
  require(fields.rows() == sys.n && fields.cols() == layout.n_sources(), ErrorKind::InvalidArgument,
          "field shape does not match the layout");
  const double f = inv_two_zeta(sys.zeta);
  Eigen::MatrixXcd out(layout.n_detectors(), layout.n_sources());
  for (int m = 0; m < layout.n_detectors(); ++m) {
    const Eigen::VectorXd wb = sys.boundary_mass * profile_density(sys, layout.detectors[m]);
    for (int s = 0; s < layout.n_sources(); ++s) {
      const Eigen::VectorXcd net = sys.c * fields.col(s) - profile_density(sys, layout.sources[s]).cast<cdouble>();
      out(m, s) = wb.cast<cdouble>().dot(net) * f;  // dot conjugates the real weights only
    }
  }
  return out;
}

Eigen::MatrixXcd forward_map(const Mesh& mesh, const ParamField& params,
                             const SourceDetectorLayout& layout, double omega, double zeta) {
  layout.validate(mesh);
  const SystemMatrix sys = assemble_system(mesh, params, omega, zeta, false);
  return measure_boundary(sys, layout, solve_forward(sys, layout));
}

Eigen::VectorXcd flatten_data(const Eigen::MatrixXcd& data) {
  Eigen::VectorXcd v(data.size());
  for (int m = 0; m < data.rows(); ++m)
    for (int s = 0; s < data.cols(); ++s) v[m * data.cols() + s] = data(m, s);
  return v;
}

Eigen::MatrixXcd unflatten_data(const Eigen::VectorXcd& flat, int n_detectors, int n_sources) {
  require(flat.size() == static_cast<long>(n_detectors) * n_sources, ErrorKind::InvalidArgument,
          "flat data has wrong length");
  Eigen::MatrixXcd d(n_detectors, n_sources);
  for (int m = 0; m < n_detectors; ++m)
    for (int s = 0; s < n_sources; ++s) d(m, s) = flat[m * n_sources + s];
  return d;
}

void write_data(const Eigen::MatrixXcd& data, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "source_id,detector_id,re,im\n";
  for (int m = 0; m < data.rows(); ++m)
    for (int s = 0; s < data.cols(); ++s)
      f << s << ',' << m << ',' << data(m, s).real() << ',' << data(m, s).imag() << '\n';
}

Eigen::MatrixXcd read_data(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string line;
  std::getline(f, line);
  require(line.rfind("source_id,detector_id", 0) == 0, ErrorKind::InvalidData, "bad data header");
  struct Row { int s, m; double re, im; };
  std::vector<Row> rows;
  int ns = 0, nd = 0;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    Row r;
    ss >> r.s >> r.m >> r.re >> r.im;
    require(!ss.fail() && r.s >= 0 && r.m >= 0, ErrorKind::InvalidData, "bad data row: " + line);
    require(std::isfinite(r.re) && std::isfinite(r.im), ErrorKind::InvalidData, "non-finite datum");
    ns = std::max(ns, r.s + 1);
    nd = std::max(nd, r.m + 1);
    rows.push_back(r);
  }
  require(rows.size() == static_cast<std::size_t>(ns) * nd, ErrorKind::InvalidData,
          "data file does not cover every source-detector pair");
  Eigen::MatrixXcd d = Eigen::MatrixXcd::Constant(nd, ns, cdouble(std::nan(""), 0.0));
  for (const auto& r : rows) d(r.m, r.s) = cdouble(r.re, r.im);
  require(d.allFinite(), ErrorKind::InvalidData, "duplicate source-detector pair in data file");
  return d;
}

}  // namespace difftomo
