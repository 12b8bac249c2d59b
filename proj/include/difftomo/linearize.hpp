#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "difftomo/forward.hpp"
#include "difftomo/greens.hpp"

namespace difftomo {

/// Sensitivities of the boundary data to nodal parameters. Rows follow the
/// detector-major order of flatten_data; a_mu maps +d mu_a to the data change.
struct Jacobian {
  Eigen::MatrixXcd a_mu;
  Eigen::MatrixXcd a_d;
  int n_detectors = 0;
  int n_sources = 0;

  int rows() const { return static_cast<int>(a_mu.rows()); }
  int cols() const { return static_cast<int>(a_mu.cols()); }
  /// [a_mu a_d]
  Eigen::MatrixXcd combined() const;
};

enum class JacobianMethod { Batched, RowByRow };

/// Adjoint fields, one column per detector: K^{-1} (measurement row)^T.
Eigen::MatrixXcd adjoint_fields(const SystemMatrix& sys, const ForwardFactor& factor,
                                const SourceDetectorLayout& layout);

/// Jacobian from forward fields U and adjoint fields Z. RowByRow uses the
/// per-node derivative matrices (requires them to be assembled); Batched
/// loops over elements once for all rows.
Jacobian assemble_jacobian(const SystemMatrix& sys, const SourceDetectorLayout& layout,
                           const Eigen::MatrixXcd& fields, const Eigen::MatrixXcd& adjoints,
                           JacobianMethod method = JacobianMethod::Batched);

/// Convenience: assemble, factor, solve forward and adjoint problems.
Jacobian assemble_jacobian(const Mesh& mesh, const ParamField& params0,
                           const SourceDetectorLayout& layout, double omega,
                           double zeta = kDefaultZeta,
                           JacobianMethod method = JacobianMethod::Batched);

/// CSV with header "rows,cols,blocks" followed by "block,row,col,re,im".
void write_jacobian(const Jacobian& jac, const std::string& path);

using Point3 = Eigen::Vector3d;

/// Kernels of the first two Born terms in an infinite background medium.
struct BornKernels {
  cdouble k = 0.0;
  double d0 = 1.0;

  cdouble green(const Point3& a, const Point3& b) const;
  Eigen::Vector3cd green_grad(const Point3& a, const Point3& b) const;  // d/da

  /// G(r1,r) G(r,r2)
  cdouble k1_1(const Point3& r1, const Point3& r2, const Point3& r) const;
  /// grad_r G(r1,r) . grad_r G(r,r2)
  cdouble k1_2(const Point3& r1, const Point3& r2, const Point3& r) const;
  /// -G(r1,r) G(r,r') G(r',r2)
  cdouble k2_11(const Point3& r1, const Point3& r2, const Point3& r, const Point3& rp) const;
  /// -G(r1,r) grad_r' G(r,r') . grad_r' G(r',r2)
  cdouble k2_12(const Point3& r1, const Point3& r2, const Point3& r, const Point3& rp) const;
  /// -grad_r G(r1,r) . grad_r G(r,r') G(r',r2)
  cdouble k2_21(const Point3& r1, const Point3& r2, const Point3& r, const Point3& rp) const;
  /// -grad_r G(r1,r) . grad_r [grad_r' G(r,r') . grad_r' G(r',r2)]
  cdouble k2_22(const Point3& r1, const Point3& r2, const Point3& r, const Point3& rp) const;
};

BornKernels born_kernels(const Background& background);

/// lambda^{-b} and a lambda^{-b} ln(lambda) per wavelength.
struct ScatteringFactors {
  Eigen::VectorXd b_a;
  Eigen::VectorXd b_b;
};
ScatteringFactors scattering_factors(double a, double b, const Eigen::VectorXd& wavelengths);

/// Multispectral block system. Column blocks: one per chromophore, then the
/// scattering amplitude a and power b; row blocks: one per wavelength.
/// The scattering sensitivity block is taken from Jacobian::a_d.
Eigen::MatrixXcd assemble_multispectral(const std::vector<Jacobian>& jacobians,
                                        const Eigen::MatrixXd& extinction, double a, double b,
                                        const Eigen::VectorXd& wavelengths);

}  // namespace difftomo
