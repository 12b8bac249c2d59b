#include "difftomo/shape.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <queue>
#include <sstream>

#include <Eigen/Cholesky>

#include "difftomo/bayes.hpp"
#include "difftomo/error.hpp"
#include "difftomo/forward.hpp"
#include "difftomo/linear_solvers.hpp"
#include "difftomo/linearize.hpp"

namespace difftomo {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
using Poly = std::vector<Eigen::Vector2d>;

double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

// Keeps the part of `subject` to the left of the directed line a -> b.
Poly clip_half_plane(const Poly& subject, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  Poly out;
  const std::size_t n = subject.size();
  if (n == 0) return out;
  const Eigen::Vector2d d = b - a;
  auto side = [&](const Eigen::Vector2d& p) { return cross(d, p - a); };
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = subject[i];
    const Eigen::Vector2d& q = subject[(i + 1) % n];
    const double sp = side(p), sq = side(q);
    if (sp >= 0.0) out.push_back(p);
    if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
  }
  return out;
}

// Area and first moments of a closed polygon.
void moments(const Poly& p, double& area, Eigen::Vector2d& centroid) {
  area = 0.0;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto& a = p[i];
    const auto& b = p[(i + 1) % p.size()];
    const double c = cross(a, b);
    area += c;
    m += (a + b) * c;
  }
  area *= 0.5;
  centroid = area != 0.0 ? Eigen::Vector2d(m / (6.0 * area)) : Eigen::Vector2d::Zero();
}

struct Box {
  Eigen::Vector2d lo, hi;
};

Box bounds(const Poly& p) {
  Box b{p[0], p[0]};
  for (const auto& v : p) {
    b.lo = b.lo.cwiseMin(v);
    b.hi = b.hi.cwiseMax(v);
  }
  return b;
}

void check_inside_mesh(const Mesh& mesh, const Poly& poly) {
  Eigen::Vector3d bary;
  for (const auto& v : poly)
    require(locate_point(mesh, v, bary) >= 0, ErrorKind::InvalidShape, "shape boundary leaves the domain");
}

Eigen::MatrixXd stack_data(const FemModel& model, const Eigen::MatrixXcd& m) {
  return model.complex_data() ? stack_real(m) : Eigen::MatrixXd(m.real());
}

Eigen::MatrixXd whitening(const Covariance& gamma_e, int n) {
  if (gamma_e.size() == 0) return Eigen::MatrixXd::Identity(n, n);
  require(gamma_e.size() == n, ErrorKind::InvalidCovariance, "noise covariance size mismatch");
  return gamma_e.factor();
}

double mesh_spacing(const Mesh& mesh) {
  if (mesh.spacing > 0.0) return mesh.spacing;
  double sum = 0.0;
  int count = 0;
  for (const auto& t : mesh.triangles)
    for (int i = 0; i < 3; ++i) {
      sum += (mesh.nodes[t[i]] - mesh.nodes[t[(i + 1) % 3]]).norm();
      ++count;
    }
  return sum / count;
}

}  // namespace

double ShapeCoeffs::basis(int k, double theta) {
  if (k == 0) return 1.0;
  const int m = (k + 1) / 2;
  return (k % 2 == 1) ? std::cos(m * theta) : std::sin(m * theta);
}

double ShapeCoeffs::radius(double theta) const {
  double r = 0.0;
  for (int k = 0; k < gamma.size(); ++k) r += gamma[k] * basis(k, theta);
  return r;
}

void ShapeCoeffs::validate() const {
  require(gamma.size() >= 1 && gamma.size() % 2 == 1, ErrorKind::InvalidShape,
          "shape needs an odd number of coefficients");
  require(gamma.allFinite() && center.allFinite(), ErrorKind::InvalidShape, "shape coefficients must be finite");
  for (int i = 0; i < 720; ++i)
    require(radius(kTwoPi * i / 720.0) > 0.0, ErrorKind::InvalidShape, "shape radius is not positive");
}

Poly boundary_from_coeffs(const ShapeCoeffs& coeffs, int n_points) {
  coeffs.validate();
  require(n_points >= 3, ErrorKind::InvalidArgument, "polygon needs at least three points");
  Poly poly(n_points);
  for (int j = 0; j < n_points; ++j) {
    const double t = kTwoPi * j / n_points;
    poly[j] = coeffs.center + coeffs.radius(t) * Eigen::Vector2d(std::cos(t), std::sin(t));
  }
  return poly;
}

double polygon_area(const Poly& poly) {
  double a;
  Eigen::Vector2d c;
  moments(poly, a, c);
  return a;
}

Eigen::Vector2d polygon_centroid(const Poly& poly) {
  double a;
  Eigen::Vector2d c;
  moments(poly, a, c);
  return c;
}

Eigen::VectorXd partial_volume(const Mesh& mesh, const Poly& poly) {
  const Box pb = bounds(poly);
  Eigen::VectorXd num = Eigen::VectorXd::Zero(mesh.node_count());
  for (int e = 0; e < mesh.element_count(); ++e) {
    auto t = mesh.triangles[e];
    Poly tri = {mesh.nodes[t[0]], mesh.nodes[t[1]], mesh.nodes[t[2]]};
    if (mesh.signed_area(e) < 0.0) {
      std::swap(tri[1], tri[2]);
      std::swap(t[1], t[2]);
    }
    const Box tb = bounds(tri);
    if ((tb.hi.array() < pb.lo.array()).any() || (tb.lo.array() > pb.hi.array()).any()) continue;
    Poly piece = poly;
    for (int i = 0; i < 3 && !piece.empty(); ++i) piece = clip_half_plane(piece, tri[i], tri[(i + 1) % 3]);
    if (piece.size() < 3) continue;
    double area;
    Eigen::Vector2d c;
    moments(piece, area, c);
    if (area <= 0.0) continue;
    // barycentric coordinates of the piece centroid give the hat integrals
    const double full = cross(tri[1] - tri[0], tri[2] - tri[0]);
    const double l1 = cross(c - tri[0], tri[2] - tri[0]) / full;
    const double l2 = cross(tri[1] - tri[0], c - tri[0]) / full;
    const double l0 = 1.0 - l1 - l2;
    num[t[0]] += area * l0;
    num[t[1]] += area * l1;
    num[t[2]] += area * l2;
  }
  const Eigen::VectorXd lumped = mesh.lumped_mass().cwiseAbs();
  return num.cwiseQuotient(lumped).cwiseMin(1.0).cwiseMax(0.0);
}

ParamField shape_params(const FemModel& model, const InclusionValues& inc, const ShapeCoeffs& coeffs,
                        const ShapeOptions& opts) {
  require(inc.mu_a >= 0.0 && inc.diff > 0.0, ErrorKind::InvalidArgument, "inclusion values are not admissible");
  const Poly poly = boundary_from_coeffs(coeffs, opts.n_points);
  check_inside_mesh(model.mesh(), poly);
  const Eigen::VectorXd frac = partial_volume(model.mesh(), poly);
  ParamField p = model.background();
  p.mu_a = p.mu_a + frac.cwiseProduct((Eigen::VectorXd::Constant(frac.size(), inc.mu_a) - p.mu_a));
  p.diff = p.diff + frac.cwiseProduct((Eigen::VectorXd::Constant(frac.size(), inc.diff) - p.diff));
  return p;
}

Eigen::VectorXd shape_forward(const FemModel& model, const InclusionValues& inc, const ShapeCoeffs& coeffs,
                              const ShapeOptions& opts) {
  const ParamField p = shape_params(model, inc, coeffs, opts);
  return model.stack(forward_map(model.mesh(), p, model.layout(), model.omega(), model.system().zeta));
}

Eigen::MatrixXd shape_jacobian(const FemModel& model, const InclusionValues& inc, const ShapeCoeffs& coeffs,
                               const ShapeOptions& opts) {
  const Mesh& mesh = model.mesh();
  const ParamField p = shape_params(model, inc, coeffs, opts);
  const Jacobian jac = assemble_jacobian(mesh, p, model.layout(), model.omega(), model.system().zeta);
  const Eigen::VectorXd lumped = mesh.lumped_mass().cwiseAbs();
  const ParamField& bg = model.background();
  const Eigen::VectorXd dmu = (Eigen::VectorXd::Constant(bg.mu_a.size(), inc.mu_a) - bg.mu_a).cwiseQuotient(lumped);
  const Eigen::VectorXd dd = (Eigen::VectorXd::Constant(bg.diff.size(), inc.diff) - bg.diff).cwiseQuotient(lumped);
  // jump-weighted PMDF density on the nodes, one row per datum
  const Eigen::MatrixXd rho = stack_data(model, jac.a_mu) * dmu.asDiagonal() +
                              stack_data(model, jac.a_d) * dd.asDiagonal();

  const int nq = opts.n_points * opts.quad_per_segment;
  const int nk = static_cast<int>(coeffs.gamma.size());
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(mesh.node_count(), nk);
  Eigen::Vector3d bary;
  for (int q = 0; q < nq; ++q) {
    const double t = kTwoPi * (q + 0.5) / nq;
    const double r = coeffs.radius(t);
    const Eigen::Vector2d pt = coeffs.center + r * Eigen::Vector2d(std::cos(t), std::sin(t));
    const int e = locate_point(mesh, pt, bary);
    require(e >= 0, ErrorKind::InvalidShape, "shape boundary leaves the domain");
    for (int k = 0; k < nk; ++k) {
      const double f = ShapeCoeffs::basis(k, t) * r * kTwoPi / nq;
      for (int i = 0; i < 3; ++i) w(mesh.triangles[e][i], k) += bary[i] * f;
    }
  }
  return rho * w;
}

ShapeResult shape_reconstruct(const FemModel& model, const Eigen::VectorXd& data, const ShapeCoeffs& initial,
                              const InclusionValues& inc, const ShapeReconOptions& opts,
                              const Covariance& gamma_e) {
  require(data.size() == model.data_count(), ErrorKind::InvalidData, "data length mismatch");
  require(opts.lm_lambda > 0.0, ErrorKind::InvalidArgument, "lm_lambda must be positive");
  const Eigen::MatrixXd le = whitening(gamma_e, static_cast<int>(data.size()));
  ShapeResult res;
  res.coeffs = initial;
  Eigen::VectorXd r = le * (data - shape_forward(model, inc, res.coeffs, opts.shape));
  double misfit = 0.5 * r.squaredNorm();
  res.misfits.push_back(misfit);
  double lambda = opts.lm_lambda;
  for (int it = 0; it < opts.max_iterations && lambda < 1e12; ++it) {
    res.iterations = it + 1;
    if (misfit == 0.0) break;
    const Eigen::MatrixXd a = le * shape_jacobian(model, inc, res.coeffs, opts.shape);
    Eigen::MatrixXd h = a.transpose() * a;
    const double scale = h.diagonal().maxCoeff();
    if (!(scale > 0.0)) break;
    h.diagonal().array() += lambda * scale;
    ShapeCoeffs trial = res.coeffs;
    trial.gamma += h.ldlt().solve(a.transpose() * r);
    bool ok = true;
    Eigen::VectorXd rt;
    try {
      rt = le * (data - shape_forward(model, inc, trial, opts.shape));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::InvalidShape) throw;
      ok = false;
    }
    if (ok && 0.5 * rt.squaredNorm() < misfit) {
      const double prev = misfit;
      res.coeffs = trial;
      r = rt;
      misfit = 0.5 * r.squaredNorm();
      res.misfits.push_back(misfit);
      lambda /= 10.0;
      if (prev - misfit <= opts.rel_tol * prev) break;
    } else {
      ++res.rejected;
      lambda *= 10.0;
    }
  }
  return res;
}

void write_shape_coeffs(const ShapeCoeffs& coeffs, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "k,value\n";
  for (int k = 0; k < coeffs.gamma.size(); ++k) f << k << ',' << coeffs.gamma[k] << '\n';
  f << "center_x," << coeffs.center.x() << "\ncenter_y," << coeffs.center.y() << '\n';
}

ShapeCoeffs read_shape_coeffs(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  std::string line;
  std::getline(f, line);
  require(line == "k,value", ErrorKind::InvalidData, "bad shape header in " + path);
  std::vector<double> g;
  ShapeCoeffs c;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorKind::InvalidData, "bad shape row: " + line);
    const std::string key = line.substr(0, comma);
    double v = 0.0;
    try {
      v = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidData, "bad shape value: " + line);
    }
    if (key == "center_x") {
      c.center.x() = v;
    } else if (key == "center_y") {
      c.center.y() = v;
    } else {
      require(key == std::to_string(g.size()), ErrorKind::InvalidData, "shape rows out of order: " + line);
      g.push_back(v);
    }
  }
  c.gamma = Eigen::Map<Eigen::VectorXd>(g.data(), g.size());
  c.validate();
  return c;
}

ParamField LevelSetState::params(double c) const {
  require(phi_mu.size() == phi_d.size(), ErrorKind::InvalidArgument, "level sets differ in length");
  ParamField p;
  p.c = c;
  p.mu_a = phi_mu.unaryExpr([&](double v) { return v <= 0.0 ? mu_int : mu_ext; });
  p.diff = phi_d.unaryExpr([&](double v) { return v <= 0.0 ? d_int : d_ext; });
  return p;
}

Eigen::VectorXd circle_level_set(const Mesh& mesh, const std::vector<Eigen::Vector3d>& circles, double cap) {
  require(!circles.empty(), ErrorKind::InvalidArgument, "need at least one circle");
  Eigen::VectorXd phi = Eigen::VectorXd::Constant(mesh.node_count(), HUGE_VAL);
  for (int v = 0; v < mesh.node_count(); ++v)
    for (const auto& c : circles)
      phi[v] = std::min(phi[v], (mesh.nodes[v] - c.head<2>()).norm() - c[2]);
  if (cap > 0.0) phi = phi.cwiseMax(-cap).cwiseMin(cap);
  return phi;
}

int count_components(const Mesh& mesh, const std::vector<bool>& mask) {
  require(static_cast<int>(mask.size()) == mesh.node_count(), ErrorKind::InvalidArgument, "mask size mismatch");
  const auto adj = mesh.adjacency();
  std::vector<bool> seen(mask.size(), false);
  int count = 0;
  for (int s = 0; s < mesh.node_count(); ++s) {
    if (!mask[s] || seen[s]) continue;
    ++count;
    std::queue<int> q;
    q.push(s);
    seen[s] = true;
    while (!q.empty()) {
      const int v = q.front();
      q.pop();
      for (int u : adj[v])
        if (mask[u] && !seen[u]) {
          seen[u] = true;
          q.push(u);
        }
    }
  }
  return count;
}

LevelSetResult levelset_evolve(const FemModel& model, const Eigen::VectorXd& data, const LevelSetState& state,
                               const LevelSetOptions& opts, const Covariance& gamma_e) {
  const Mesh& mesh = model.mesh();
  const int n = mesh.node_count();
  require(model.unknowns() == Unknowns::Both, ErrorKind::InvalidArgument,
          "level-set evolution needs a model over both parameters");
  require(data.size() == model.data_count(), ErrorKind::InvalidData, "data length mismatch");
  require(opts.dt > 0.0 && opts.interior_dt >= 0.0, ErrorKind::InvalidArgument, "dt must be positive");
  require(state.phi_mu.size() == n && state.phi_d.size() == n, ErrorKind::InvalidArgument,
          "level sets do not match the mesh");
  require(state.mu_ext >= 0.0 && state.d_ext > 0.0, ErrorKind::InvalidArgument,
          "exterior values must be admissible");

  const Eigen::MatrixXd le = whitening(gamma_e, static_cast<int>(data.size()));
  const Eigen::MatrixXd pe = le.transpose() * le;
  const Eigen::VectorXd lumped = mesh.lumped_mass().cwiseAbs();
  const double h = mesh_spacing(mesh);
  const Eigen::SparseMatrix<double> stiff = weighted_stiffness(mesh, Eigen::VectorXd::Ones(n));
  const Eigen::SparseMatrix<double> smooth_op = h * h * stiff;
  const Eigen::VectorXd diag = lumped + h * h * Eigen::VectorXd(stiff.diagonal());
  const auto adj = mesh.adjacency();

  // a few Jacobi sweeps of (M + h^2 K) f = M g
  auto smooth = [&](const Eigen::VectorXd& g) {
    const Eigen::VectorXd rhs = lumped.cwiseProduct(g);
    Eigen::VectorXd f = g;
    for (int s = 0; s < opts.smoothing_sweeps; ++s) {
      const Eigen::VectorXd off = lumped.cwiseProduct(f) + smooth_op * f - diag.cwiseProduct(f);
      f = (rhs - off).cwiseQuotient(diag);
    }
    return f;
  };
  // mean of s over nodes on either side of a sign change of phi
  auto interface_mean = [&](const Eigen::VectorXd& phi, const Eigen::VectorXd& s) {
    double sum = 0.0;
    int cnt = 0;
    for (int v = 0; v < n; ++v) {
      bool near = false;
      for (int u : adj[v]) near = near || ((phi[u] <= 0.0) != (phi[v] <= 0.0));
      if (near) sum += s[v], ++cnt;
    }
    return cnt ? sum / cnt : 0.0;
  };

  auto misfit_of = [&](const LevelSetState& cur, Eigen::VectorXd* s_out) {
    const Eigen::VectorXd x = model.to_vector(cur.params(model.background().c));
    const Eigen::VectorXd r = data - model.forward(x);
    if (s_out) *s_out = model.adjoint(x, pe * r);
    return 0.5 * r.dot(pe * r);
  };

  LevelSetResult res;
  res.state = state;
  Eigen::VectorXd s;
  double misfit = misfit_of(res.state, &s);
  res.misfits.push_back(misfit);
  double scale = 0.0;
  for (int it = 0; it < opts.iterations; ++it) {
    const LevelSetState& st = res.state;
    const Eigen::VectorXd s_mu = s.head(n).cwiseQuotient(lumped);
    const Eigen::VectorXd s_d = s.tail(n).cwiseQuotient(lumped);
    const double jump_mu = st.mu_int - st.mu_ext, jump_d = st.d_int - st.d_ext;
    const Eigen::VectorXd f_mu = smooth(jump_mu * s_mu);
    const Eigen::VectorXd f_d = smooth(jump_d * s_d);
    // the first nonzero forcing fixes the scale, so later steps shrink with the residual
    if (scale == 0.0) scale = std::max(f_mu.cwiseAbs().maxCoeff(), f_d.cwiseAbs().maxCoeff());
    if (!(scale > 0.0)) {
      res.misfits.push_back(misfit);
      continue;
    }
    const double h_mu = std::abs(jump_mu) * interface_mean(st.phi_mu, s_mu);
    const double h_d = std::abs(jump_d) * interface_mean(st.phi_d, s_d);
    bool accepted = false;
    double tau = opts.dt;
    for (int k = 0; k <= opts.max_halvings && !accepted; ++k, tau *= 0.5) {
      LevelSetState trial = st;
      for (int v = 0; v < n; ++v) {
        if (opts.band > 0.0 && std::abs(st.phi_mu[v]) > opts.band && std::abs(st.phi_d[v]) > opts.band) continue;
        trial.phi_mu[v] -= tau * f_mu[v] / scale;
        trial.phi_d[v] -= tau * f_d[v] / scale;
      }
      trial.mu_int = std::max(0.0, st.mu_int + tau / opts.dt * opts.interior_dt * h_mu);
      trial.d_int = std::max(kMinDiffusion, st.d_int + tau / opts.dt * opts.interior_dt * h_d);
      Eigen::VectorXd s_trial;
      const double m_trial = misfit_of(trial, &s_trial);
      if (opts.max_halvings == 0 || m_trial <= misfit) {
        res.state = std::move(trial);
        s = std::move(s_trial);
        misfit = m_trial;
        accepted = true;
      }
    }
    if (!accepted) break;
    res.misfits.push_back(misfit);
  }
  return res;
}

void write_level_set(const LevelSetState& state, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "node_index,phi_mu,phi_d\n";
  for (int i = 0; i < state.phi_mu.size(); ++i) f << i << ',' << state.phi_mu[i] << ',' << state.phi_d[i] << '\n';
}

}  // namespace difftomo
