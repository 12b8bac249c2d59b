#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "difftomo/covariance.hpp"

namespace difftomo {

/// Iterate history of an iterative solver. objectives has iterations + 1
/// entries (the first is the starting value).
struct SolveReport {
  Eigen::VectorXd x;
  int iterations = 0;
  std::vector<double> objectives;
  std::string termination;  // "converged", "max-iterations", "stagnated"
};

void write_report(const SolveReport& report, const std::string& path);

/// Whitened problem: a_tilde = L_e A L_x^{-1}, y_tilde = L_e y and
/// x = L_x^{-1} x_tilde.
struct CanonicalForm {
  Eigen::MatrixXd a_tilde;
  Eigen::VectorXd y_tilde;
  Covariance gamma_e;
  Covariance gamma_x;

  Eigen::VectorXd to_original(const Eigen::VectorXd& x_tilde) const { return gamma_x.unwhiten(x_tilde); }
  Eigen::VectorXd to_canonical(const Eigen::VectorXd& x) const { return gamma_x.whiten(x); }
  /// 1/2 |y~ - A~ x~|^2 + alpha/2 |x~|^2
  double objective(const Eigen::VectorXd& x_tilde, double alpha) const;
};

CanonicalForm canonical_transform(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                  const Covariance& gamma_e, const Covariance& gamma_x);

/// Stacks real and imaginary parts: [Re A; Im A].
Eigen::MatrixXd stack_real(const Eigen::MatrixXcd& a);
Eigen::VectorXd stack_real(const Eigen::VectorXcd& v);

enum class TikhonovMode { Auto, Overdetermined, Underdetermined };

/// Minimiser of |y - A x|^2_{Ge^-1} + alpha |x|^2_{Gx^-1} in closed form.
Eigen::VectorXd tikhonov_newton(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                                const Covariance& gamma_e, const Covariance& gamma_x,
                                TikhonovMode mode = TikhonovMode::Auto);

struct IterOptions {
  int max_iterations = 1000;
  /// Stop when |E_k - E_{k-1}| <= rel_tol * |E_{k-1}|; zero runs the full budget.
  double rel_tol = 1e-10;
};

enum class GradientMethod { Steepest, Landweber };

struct GradientOptions : IterOptions {
  GradientMethod method = GradientMethod::Steepest;
  /// Landweber step; 0 picks 1/L with L the estimated Lipschitz constant.
  double tau = 0.0;
};

/// Largest eigenvalue of A~^T A~ + alpha I by 50 power iterations, divided
/// by a 0.9 safety factor.
double lipschitz_estimate(const Eigen::MatrixXd& a_tilde, double alpha);

SolveReport gradient_iterate(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                             const Covariance& gamma_e, const Covariance& gamma_x,
                             const GradientOptions& opts = {},
                             const Eigen::VectorXd& x0 = Eigen::VectorXd());

enum class BetaRule { FletcherReeves, PolakRibiere };

struct CgOptions : IterOptions {
  BetaRule beta = BetaRule::FletcherReeves;
  /// Stop when the residual norm drops below tol times its initial value.
  double tol = 1e-12;
};

/// Conjugate gradients on the canonical normal equations
/// (A~^T A~ + alpha I) x~ = A~^T y~ with exact steps.
SolveReport cg_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                     const Covariance& gamma_e, const Covariance& gamma_x, const CgOptions& opts = {},
                     const Eigen::VectorXd& x0 = Eigen::VectorXd());

/// CG for a symmetric positive definite operator H x = b.
SolveReport cg_operator(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_h,
                        const Eigen::VectorXd& b, const Eigen::VectorXd& x0, const CgOptions& opts);

/// v^(0) = Gx A^T Ge^-1 y; v^(j) = H^j v^(0) + alpha v^(j-1) with
/// H = Gx A^T Ge^-1 A, i.e. the canonical recursion mapped back.
std::vector<Eigen::VectorXd> krylov_basis(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                          double alpha, const Covariance& gamma_e,
                                          const Covariance& gamma_x, int count);

enum class RowMethod { ART, SART, SIRT };

struct RowOptions : IterOptions {
  RowMethod method = RowMethod::ART;
  double tau = 1.0;  // relaxation
  std::uint64_t seed = 0;
};

/// Row-action methods; one iteration is one sweep over the rows.
SolveReport row_action(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const RowOptions& opts,
                       const Eigen::VectorXd& x0 = Eigen::VectorXd());

/// Row/column norm weights used by SART and SIRT.
struct RowColumnWeights {
  Eigen::VectorXd r1, c1;  // absolute row and column sums
  Eigen::VectorXd r2, c2;  // squared row and column norms
};
RowColumnWeights row_column_weights(const Eigen::MatrixXd& a);

enum class MultiplicativeMethod { MART, MLEM, MAPEM };

struct MultiplicativeOptions : IterOptions {
  MultiplicativeMethod method = MultiplicativeMethod::MLEM;
  double alpha = 0.0;
  /// Gradient of the prior for MAP-EM (evaluated at the current iterate).
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> prior_grad;
  double relaxation = 1.0;  // MART exponent scaling
};

/// Kullback-Leibler divergence sum y log(y / Ax) - y + Ax.
double kl_divergence(const Eigen::VectorXd& y, const Eigen::VectorXd& ax);

/// Positivity-preserving multiplicative updates for A >= 0, y > 0.
SolveReport multiplicative(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                           const MultiplicativeOptions& opts,
                           const Eigen::VectorXd& x0 = Eigen::VectorXd());

}  // namespace difftomo
