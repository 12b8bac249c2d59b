#include "difftomo/linearize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "difftomo/error.hpp"
#include "difftomo/parallel.hpp"

namespace difftomo {

namespace {
double triple_coef(int k, int l, int m) {
  if (k == l && l == m) return 6.0;
  if (k == l || l == m || k == m) return 2.0;
  return 1.0;
}
}  // namespace

Eigen::MatrixXcd Jacobian::combined() const {
  Eigen::MatrixXcd out(a_mu.rows(), a_mu.cols() + a_d.cols());
  out << a_mu, a_d;
  return out;
}

Eigen::MatrixXcd adjoint_fields(const SystemMatrix& sys, const ForwardFactor& factor,
                                const SourceDetectorLayout& layout) {
  // K is complex symmetric, so the adjoint solve reuses the forward factor
  const Eigen::MatrixXd meas = measurement_matrix(sys, layout);
  return factor.solve(meas.transpose().cast<cdouble>());
}

Jacobian assemble_jacobian(const SystemMatrix& sys, const SourceDetectorLayout& layout,
                           const Eigen::MatrixXcd& U, const Eigen::MatrixXcd& Z,
                           JacobianMethod method) {
  const int nd = layout.n_detectors(), ns = layout.n_sources(), n = sys.n;
  require(U.rows() == n && U.cols() == ns && Z.rows() == n && Z.cols() == nd,
          ErrorKind::InvalidArgument, "field shapes do not match the layout");
  Jacobian J;
  J.n_detectors = nd;
  J.n_sources = ns;
  J.a_mu = Eigen::MatrixXcd::Zero(nd * ns, n);
  J.a_d = Eigen::MatrixXcd::Zero(nd * ns, n);

  if (method == JacobianMethod::RowByRow) {
    require(static_cast<int>(sys.deriv_mu.size()) == n, ErrorKind::InvalidArgument,
            "row-by-row assembly needs the derivative matrices");
    parallel_for(nd * ns, [&](int row) {
      const int m = row / ns, s = row % ns;
      for (int k = 0; k < n; ++k) {
        const Eigen::VectorXcd ku = sys.deriv_mu[k] * U.col(s);
        const Eigen::VectorXcd kd = sys.deriv_d[k] * U.col(s);
        J.a_mu(row, k) = -sys.c * (Z.col(m).transpose() * ku)(0);
        J.a_d(row, k) = -(Z.col(m).transpose() * kd)(0);
      }
    });
    return J;
  }

  Eigen::Matrix<cdouble, 3, Eigen::Dynamic> uloc(3, ns);
  Eigen::Matrix<cdouble, 3, Eigen::Dynamic> zloc(3, nd);
  Eigen::MatrixXcd block(nd, ns);
  for (std::size_t e = 0; e < sys.triangles.size(); ++e) {
    const auto& t = sys.triangles[e];
    const auto& el = sys.elements[e];
    for (int i = 0; i < 3; ++i) {
      uloc.row(i) = U.row(t[i]);
      zloc.row(i) = Z.row(t[i]);
    }
    const Eigen::Matrix3cd st = (el.stiffness / 3.0).cast<cdouble>();
    const Eigen::MatrixXcd dblock = zloc.transpose() * st * uloc;
    for (int k = 0; k < 3; ++k) {
      Eigen::Matrix3d T;
      for (int l = 0; l < 3; ++l)
        for (int m = 0; m < 3; ++m) T(l, m) = el.area * triple_coef(k, l, m) / 60.0;
      block.noalias() = zloc.transpose() * T.cast<cdouble>() * uloc;
      for (int m = 0; m < nd; ++m)
        for (int s = 0; s < ns; ++s) {
          J.a_mu(m * ns + s, t[k]) -= sys.c * block(m, s);
          J.a_d(m * ns + s, t[k]) -= dblock(m, s);
        }
    }
  }
  return J;
}

Jacobian assemble_jacobian(const Mesh& mesh, const ParamField& params0,
                           const SourceDetectorLayout& layout, double omega, double zeta,
                           JacobianMethod method) {
  layout.validate(mesh);
  const SystemMatrix sys =
      assemble_system(mesh, params0, omega, zeta, method == JacobianMethod::RowByRow);
  ForwardFactor factor(sys.k_matrix);
  const Eigen::MatrixXcd U = solve_forward(sys, factor, layout);
  const Eigen::MatrixXcd Z = adjoint_fields(sys, factor, layout);
  return assemble_jacobian(sys, layout, U, Z, method);
}

void write_jacobian(const Jacobian& jac, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "rows,cols,blocks\n"
    << jac.rows() << ',' << jac.cols() << ",2\n";
  const Eigen::MatrixXcd* blocks[2] = {&jac.a_mu, &jac.a_d};
  for (int b = 0; b < 2; ++b)
    for (int r = 0; r < jac.rows(); ++r)
      for (int c = 0; c < jac.cols(); ++c) {
        const cdouble v = (*blocks[b])(r, c);
        f << b << ',' << r << ',' << c << ',' << v.real() << ',' << v.imag() << '\n';
      }
}

cdouble BornKernels::green(const Point3& a, const Point3& b) const {
  return greens_infinite(a, b, k, d0);
}

Eigen::Vector3cd BornKernels::green_grad(const Point3& a, const Point3& b) const {
  return greens_infinite_gradient(a, b, k, d0);
}

cdouble BornKernels::k1_1(const Point3& r1, const Point3& r2, const Point3& r) const {
  return green(r1, r) * green(r, r2);
}

cdouble BornKernels::k1_2(const Point3& r1, const Point3& r2, const Point3& r) const {
  // both gradients taken with respect to the interior point r
  return (green_grad(r, r1).transpose() * green_grad(r, r2))(0);
}

cdouble BornKernels::k2_11(const Point3& r1, const Point3& r2, const Point3& r,
                           const Point3& rp) const {
  return -green(r1, r) * green(r, rp) * green(rp, r2);
}

cdouble BornKernels::k2_12(const Point3& r1, const Point3& r2, const Point3& r,
                           const Point3& rp) const {
  const Eigen::Vector3cd a = green_grad(rp, r);
  const Eigen::Vector3cd b = green_grad(rp, r2);
  return -green(r1, r) * (a.transpose() * b)(0);
}

cdouble BornKernels::k2_21(const Point3& r1, const Point3& r2, const Point3& r,
                           const Point3& rp) const {
  const Eigen::Vector3cd a = green_grad(r, r1);
  const Eigen::Vector3cd b = green_grad(r, rp);
  return -(a.transpose() * b)(0) * green(rp, r2);
}

cdouble BornKernels::k2_22(const Point3& r1, const Point3& r2, const Point3& r,
                           const Point3& rp) const {
  // grad_r grad_r' G(r,r') = -Hess G; the two minus signs cancel
  const Eigen::Vector3cd a = green_grad(r, r1);
  const Eigen::Matrix3cd H = greens_infinite_hessian(r, rp, k, d0);
  const Eigen::Vector3cd b = green_grad(rp, r2);
  return (a.transpose() * H * b)(0);
}

BornKernels born_kernels(const Background& background) {
  BornKernels K;
  K.k = diffuse_wavenumber(background);
  K.d0 = background.d0;
  return K;
}

ScatteringFactors scattering_factors(double a, double b, const Eigen::VectorXd& wavelengths) {
  ScatteringFactors f;
  f.b_a.resize(wavelengths.size());
  f.b_b.resize(wavelengths.size());
  for (int j = 0; j < wavelengths.size(); ++j) {
    require(wavelengths[j] > 0.0, ErrorKind::InvalidArgument, "wavelengths must be positive");
    f.b_a[j] = std::pow(wavelengths[j], -b);
    f.b_b[j] = a * f.b_a[j] * std::log(wavelengths[j]);
  }
  return f;
}

Eigen::MatrixXcd assemble_multispectral(const std::vector<Jacobian>& jacobians,
                                        const Eigen::MatrixXd& extinction, double a, double b,
                                        const Eigen::VectorXd& wavelengths) {
  const int nl = static_cast<int>(jacobians.size());
  require(nl > 0, ErrorKind::InvalidArgument, "no Jacobians supplied");
  require(wavelengths.size() == nl, ErrorKind::InvalidArgument,
          "one wavelength per Jacobian required");
  require(extinction.cols() == nl && extinction.rows() > 0, ErrorKind::InvalidArgument,
          "extinction must be chromophores x wavelengths");
  const int rows = jacobians[0].rows(), n = jacobians[0].cols();
  for (const auto& J : jacobians)
    require(J.rows() == rows && J.cols() == n && J.a_d.rows() == rows && J.a_d.cols() == n,
            ErrorKind::InvalidArgument, "Jacobians must share their shape");
  const int nc = static_cast<int>(extinction.rows());
  const ScatteringFactors sf = scattering_factors(a, b, wavelengths);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<long>(rows) * nl, static_cast<long>(n) * (nc + 2));
  for (int j = 0; j < nl; ++j) {
    for (int k = 0; k < nc; ++k)
      out.block(j * rows, k * n, rows, n) = jacobians[j].a_mu * extinction(k, j);
    out.block(j * rows, nc * n, rows, n) = jacobians[j].a_d * sf.b_a[j];
    out.block(j * rows, (nc + 1) * n, rows, n) = jacobians[j].a_d * sf.b_b[j];
  }
  return out;
}

}  // namespace difftomo
