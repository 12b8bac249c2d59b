#include "difftomo/fem_model.hpp"

#include <cmath>

#include "difftomo/error.hpp"
#include "difftomo/linearize.hpp"

namespace difftomo {

namespace {
double triple_coef(int k, int l, int m) {
  if (k == l && l == m) return 6.0;
  if (k == l || l == m || k == m) return 2.0;
  return 1.0;
}
}  // namespace

FemModel::FemModel(Mesh mesh, SourceDetectorLayout layout, ParamField background, double omega,
                   Unknowns unknowns, double zeta)
    : mesh_(std::move(mesh)),
      layout_(std::move(layout)),
      background_(std::move(background)),
      omega_(omega),
      unknowns_(unknowns) {
  mesh_.validate();
  layout_.validate(mesh_);
  background_.validate(mesh_.node_count());
  require(layout_.n_sources() >= 1 && layout_.n_detectors() >= 1, ErrorKind::InvalidArgument,
          "layout needs at least one source and one detector");
  sys_ = assemble_system(mesh_, background_, omega, zeta, false);
  loads_ = load_vectors(sys_, layout_);
  meas_ = measurement_matrix(sys_, layout_);
}

int FemModel::parameter_count() const {
  return (unknowns_ == Unknowns::Both ? 2 : 1) * mesh_.node_count();
}

int FemModel::data_count() const {
  return (complex_data() ? 2 : 1) * layout_.n_sources() * layout_.n_detectors();
}

ParamField FemModel::params(const Eigen::VectorXd& x) const {
  const int n = mesh_.node_count();
  require(x.size() == parameter_count(), ErrorKind::InvalidArgument, "parameter length mismatch");
  ParamField p = background_;
  if (unknowns_ == Unknowns::Absorption) p.mu_a = x;
  if (unknowns_ == Unknowns::Diffusion) p.diff = x;
  if (unknowns_ == Unknowns::Both) {
    p.mu_a = x.head(n);
    p.diff = x.tail(n);
  }
  return p;
}

Eigen::VectorXd FemModel::to_vector(const ParamField& p) const {
  p.validate(mesh_.node_count());
  if (unknowns_ == Unknowns::Absorption) return p.mu_a;
  if (unknowns_ == Unknowns::Diffusion) return p.diff;
  Eigen::VectorXd x(2 * mesh_.node_count());
  x << p.mu_a, p.diff;
  return x;
}

Eigen::VectorXd FemModel::stack(const Eigen::MatrixXcd& data) const {
  const Eigen::VectorXcd flat = flatten_data(data);
  if (!complex_data()) return flat.real();
  Eigen::VectorXd out(2 * flat.size());
  out << flat.real(), flat.imag();
  return out;
}

Eigen::MatrixXcd FemModel::unstack(const Eigen::VectorXd& w) const {
  const int nd = layout_.n_detectors(), ns = layout_.n_sources(), m = nd * ns;
  require(w.size() == data_count(), ErrorKind::InvalidData, "data length mismatch");
  Eigen::VectorXcd flat = w.head(m).cast<cdouble>();
  if (complex_data()) flat += cdouble(0.0, 1.0) * w.tail(m).cast<cdouble>();
  return unflatten_data(flat, nd, ns);
}

Eigen::VectorXd FemModel::forward(const Eigen::VectorXd& x) const {
  const ParamField p = params(x);
  SystemMatrix sys = sys_;
  sys.k_matrix = sys_.compose(p);
  ForwardFactor factor(sys.k_matrix);
  return stack(measure_boundary(sys, layout_, factor.solve(loads_)));
}

Eigen::MatrixXd FemModel::jacobian(const Eigen::VectorXd& x) const {
  const ParamField p = params(x);
  SystemMatrix sys = sys_;
  sys.k_matrix = sys_.compose(p);
  ForwardFactor factor(sys.k_matrix);
  const Eigen::MatrixXcd u = factor.solve(loads_);
  const Eigen::MatrixXcd z = factor.solve(meas_.transpose().cast<cdouble>());
  const Jacobian jac = assemble_jacobian(sys, layout_, u, z, JacobianMethod::Batched);
  Eigen::MatrixXcd cols;
  if (unknowns_ == Unknowns::Absorption) cols = jac.a_mu;
  if (unknowns_ == Unknowns::Diffusion) cols = jac.a_d;
  if (unknowns_ == Unknowns::Both) cols = jac.combined();
  return complex_data() ? stack_real(cols) : Eigen::MatrixXd(cols.real());
}

Eigen::VectorXd FemModel::contract(const Eigen::MatrixXcd& z, const Eigen::MatrixXcd& u) const {
  const int n = mesh_.node_count();
  Eigen::VectorXd g_mu = Eigen::VectorXd::Zero(n), g_d = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXcd zloc(3, u.cols()), uloc(3, u.cols());
  for (std::size_t e = 0; e < sys_.triangles.size(); ++e) {
    const auto& t = sys_.triangles[e];
    const auto& el = sys_.elements[e];
    for (int i = 0; i < 3; ++i) {
      zloc.row(i) = z.row(t[i]);
      uloc.row(i) = u.row(t[i]);
    }
    const Eigen::Matrix3d q = (zloc * uloc.transpose()).real();
    const double dterm = (el.stiffness.cwiseProduct(q)).sum() / 3.0;
    for (int k = 0; k < 3; ++k) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m) s += triple_coef(k, l, m) * q(l, m);
      g_mu[t[k]] += sys_.c * el.area * s / 60.0;
      g_d[t[k]] += dterm;
    }
  }
  if (unknowns_ == Unknowns::Absorption) return g_mu;
  if (unknowns_ == Unknowns::Diffusion) return g_d;
  Eigen::VectorXd out(2 * n);
  out << g_mu, g_d;
  return out;
}

FemModel::Fields FemModel::fields(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  const ParamField p = params(x);
  ForwardFactor factor(sys_.compose(p));
  Fields f;
  f.u = factor.solve(loads_);
  f.z = factor.solve(meas_.transpose() * unstack(w).conjugate());
  return f;
}

Eigen::VectorXd FemModel::adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  const Fields f = fields(x, w);
  return -contract(f.z, f.u);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> FemModel::forward_adjoint(
    const Eigen::VectorXd& x,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weights) const {
  const ParamField p = params(x);
  SystemMatrix sys = sys_;
  sys.k_matrix = sys_.compose(p);
  ForwardFactor factor(sys.k_matrix);
  const Eigen::MatrixXcd u = factor.solve(loads_);
  Eigen::VectorXd f = stack(measure_boundary(sys, layout_, u));
  const Eigen::MatrixXcd z = factor.solve(meas_.transpose() * unstack(weights(f)).conjugate());
  return {std::move(f), -contract(z, u)};
}

std::vector<std::vector<int>> FemModel::blocks() const {
  const int nd = layout_.n_detectors(), ns = layout_.n_sources(), m = nd * ns;
  std::vector<std::vector<int>> out(ns);
  for (int s = 0; s < ns; ++s)
    for (int part = 0; part < (complex_data() ? 2 : 1); ++part)
      for (int d = 0; d < nd; ++d) out[s].push_back(part * m + d * ns + s);
  return out;
}

bool FemModel::admissible(const Eigen::VectorXd& x) const {
  if (x.size() != parameter_count() || !x.allFinite()) return false;
  const ParamField p = params(x);
  return (p.mu_a.array() >= 0.0).all() && (p.diff.array() > 0.0).all();
}

Eigen::VectorXd FemModel::project(const Eigen::VectorXd& x) const {
  require(x.size() == parameter_count(), ErrorKind::InvalidArgument, "parameter length mismatch");
  const int n = mesh_.node_count();
  Eigen::VectorXd out = x;
  if (unknowns_ == Unknowns::Absorption) out = out.cwiseMax(0.0);
  if (unknowns_ == Unknowns::Diffusion) out = out.cwiseMax(kMinDiffusion);
  if (unknowns_ == Unknowns::Both) {
    out.head(n) = out.head(n).cwiseMax(0.0);
    out.tail(n) = out.tail(n).cwiseMax(kMinDiffusion);
  }
  return out;
}

KktResidual kkt_residual(const Objective& obj, const Eigen::VectorXd& x, const Eigen::MatrixXcd& u,
                         const Eigen::MatrixXcd& z) {
  obj.validate();
  const auto* fem = dynamic_cast<const FemModel*>(obj.model.get());
  require(fem != nullptr, ErrorKind::InvalidArgument, "KKT residuals need a FEM model");
  const int n = fem->mesh().node_count(), ns = fem->layout().n_sources();
  require(u.rows() == n && u.cols() == ns && z.rows() == n && z.cols() == ns,
          ErrorKind::InvalidArgument, "field shapes do not match the mesh and layout");
  const ParamField p = fem->params(x);
  SystemMatrix sys = fem->system();
  sys.k_matrix = sys.compose(p);
  const Eigen::MatrixXd meas = measurement_matrix(sys, fem->layout());
  const Eigen::MatrixXcd q = load_vectors(sys, fem->layout());

  const Eigen::VectorXd f = fem->stack(measure_boundary(sys, fem->layout(), u));
  const Eigen::VectorXd w = obj.gamma_e.apply_inverse(obj.y - f);

  KktResidual out;
  out.res_x = fem->contract(z, u);
  if (obj.alpha != 0.0) out.res_x += obj.alpha * obj.prior_gradient(x);
  out.res_u = SpMatC(sys.k_matrix.transpose()) * z - meas.transpose() * fem->unstack(w).conjugate();
  out.res_z = sys.k_matrix * u - q;
  return out;
}

}  // namespace difftomo
