#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "difftomo/covariance.hpp"
#include "difftomo/linear_solvers.hpp"

namespace difftomo {

/// Real-valued forward map x -> F(x) with derivative information.
/// Data blocks (one per source for the FEM model) drive Kaczmarz sweeps.
class Model {
 public:
  virtual ~Model() = default;
  virtual int parameter_count() const = 0;
  virtual int data_count() const = 0;
  virtual Eigen::VectorXd forward(const Eigen::VectorXd& x) const = 0;
  virtual Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const = 0;
  /// F'(x)^* w. The default goes through the dense Jacobian.
  virtual Eigen::VectorXd adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const;
  /// F(x) together with F'(x)^* weights(F(x)); models with a shared
  /// factorization override this to avoid a second forward solve.
  virtual std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_adjoint(
      const Eigen::VectorXd& x,
      const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weights) const;
  /// Jacobian rows for one data block.
  virtual Eigen::MatrixXd jacobian_rows(const Eigen::VectorXd& x, const std::vector<int>& rows) const;
  /// Row index sets of the data blocks. Default: a single block.
  virtual std::vector<std::vector<int>> blocks() const;
  virtual bool admissible(const Eigen::VectorXd&) const { return true; }
  /// Maps x back into the admissible set.
  virtual Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x; }
};

/// F(x) = A x + b.
class LinearModel : public Model {
 public:
  explicit LinearModel(Eigen::MatrixXd a, Eigen::VectorXd b = Eigen::VectorXd(),
                       std::vector<std::vector<int>> blocks = {});
  int parameter_count() const override { return static_cast<int>(a_.cols()); }
  int data_count() const override { return static_cast<int>(a_.rows()); }
  Eigen::VectorXd forward(const Eigen::VectorXd& x) const override;
  Eigen::MatrixXd jacobian(const Eigen::VectorXd&) const override { return a_; }
  Eigen::VectorXd adjoint(const Eigen::VectorXd&, const Eigen::VectorXd& w) const override;
  std::vector<std::vector<int>> blocks() const override;
  const Eigen::MatrixXd& matrix() const { return a_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  std::vector<std::vector<int>> blocks_;
};

/// Convex penalty Psi with gradient and its linearized (Hessian) operator.
struct Prior {
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> hessian;

  /// 1/2 |x - mean|^2 in the gamma^{-1} norm.
  static Prior gaussian(const Covariance& gamma, const Eigen::VectorXd& mean);
  /// 1/2 (x - mean)^T L (x - mean) with L symmetric positive semidefinite.
  static Prior quadratic(const Eigen::MatrixXd& l, const Eigen::VectorXd& mean);
};

/// E(x) = 1/2 |y - F(x)|^2_{Ge^-1} + alpha Psi(x).
/// An empty prior means the Gaussian prior on gamma_x about zero.
struct Objective {
  std::shared_ptr<const Model> model;
  Eigen::VectorXd y;
  Covariance gamma_e;
  Covariance gamma_x;
  double alpha = 0.0;
  Prior prior;

  void validate() const;
  double misfit(const Eigen::VectorXd& x) const;
  double penalty(const Eigen::VectorXd& x) const;
  double value(const Eigen::VectorXd& x) const { return misfit(x) + alpha * penalty(x); }
  Eigen::VectorXd prior_gradient(const Eigen::VectorXd& x) const;
  Eigen::VectorXd prior_hessian(const Eigen::VectorXd& v) const;
};

struct ValueGradient {
  double value = 0.0;
  Eigen::VectorXd gradient;
};

/// g = alpha Psi'(x) - F'(x)^* Ge^-1 (y - F(x)). Throws invalid-argument
/// when x is outside the admissible set.
ValueGradient objective_and_gradient(const Objective& obj, const Eigen::VectorXd& x);

/// Quadratic: one trial step, then the zero of the interpolated directional
/// derivative (exact on quadratic objectives); falls back to Armijo.
enum class LineSearch { Armijo, Quadratic };

/// Backtracking Armijo: c = 1e-4, shrink 0.5, at most 30 halvings.
/// Returns the accepted step (0 if none decreased the objective).
double armijo_step(const Objective& obj, const Eigen::VectorXd& x, double value,
                   const Eigen::VectorXd& gradient, const Eigen::VectorXd& direction,
                   double tau0 = 1.0);

enum class GnMode { Plain, Damped, LevenbergMarquardt };

struct GnOptions {
  GnMode mode = GnMode::Damped;
  double lm_gamma0 = 1.0;
  int max_iterations = 10;
  /// Stop when the relative objective change drops below this.
  double rel_tol = 1e-10;
  CgOptions inner{};
};

/// Each outer step solves (J^T Ge^-1 J + alpha L [+ gamma I]) dx = -g by CG.
SolveReport gauss_newton(const Objective& obj, const Eigen::VectorXd& x0, const GnOptions& opts = {});

struct NcgOptions {
  BetaRule beta = BetaRule::FletcherReeves;
  /// 0 restarts only when the direction stops descending.
  int restart_every = 0;
  int max_iterations = 100;
  double grad_tol = 0.0;
  double rel_tol = 0.0;
  LineSearch line_search = LineSearch::Armijo;
};

/// Nonlinear CG with Gamma_x preconditioned directions s = -Gx g + beta s.
SolveReport ncg(const Objective& obj, const Eigen::VectorXd& x0, const NcgOptions& opts = {});

/// Pairs d_i = x_{i+1} - x_i, z_i = g_{i+1} - g_i of a limited memory BFGS.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(int capacity);
  /// Stores the pair when <z, d> > 0; returns whether it was stored.
  bool push(const Eigen::VectorXd& d, const Eigen::VectorXd& z);
  /// Two-loop product H^-1 v with initial inverse Hessian h0.
  Eigen::VectorXd apply(const Eigen::VectorXd& v,
                        const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& h0) const;
  int size() const { return static_cast<int>(d_.size()); }
  int capacity() const { return capacity_; }

 private:
  int capacity_;
  std::deque<Eigen::VectorXd> d_, z_;
  std::deque<double> rho_;
};

struct LbfgsOptions {
  int memory = 5;
  int max_iterations = 100;
  double grad_tol = 0.0;
  double rel_tol = 0.0;
  LineSearch line_search = LineSearch::Armijo;
};

SolveReport lbfgs(const Objective& obj, const Eigen::VectorXd& x0, const LbfgsOptions& opts = {});

enum class KaczmarzPreconditioner { Identity, RegularizedNormal };

struct KaczmarzOptions {
  KaczmarzPreconditioner preconditioner = KaczmarzPreconditioner::RegularizedNormal;
  int sweeps = 10;
  double relaxation = 1.0;
  double rel_tol = 0.0;
};

/// One data block at a time:
///   identity:           x += t J_i^T Ge_i^-1 r_i
///   regularized normal: x += t Gx J_i^T (J_i Gx J_i^T + alpha Ge_i)^-1 r_i
/// Objectives are recorded once per sweep.
SolveReport nonlinear_kaczmarz(const Objective& obj, const Eigen::VectorXd& x0,
                               const KaczmarzOptions& opts = {});

/// Closed-form coordinate step of 1/2 |y - A x|^2_{Ge^-1} + alpha/2 |x|^2_{Gx^-1}
/// at coordinate k, given the residual r = y - A x.
double icd_step(const Eigen::MatrixXd& a, const Eigen::VectorXd& r, const Covariance& gamma_e,
                const Covariance& gamma_x, double alpha, const Eigen::VectorXd& x, int k);

/// One sweep in a seeded random order with incremental residual updates.
/// If `objectives` is given it receives the value before the sweep and after
/// every coordinate update.
Eigen::VectorXd icd_sweep(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                          const Covariance& gamma_e, const Covariance& gamma_x, double alpha,
                          const Eigen::VectorXd& x, std::uint64_t seed,
                          std::vector<double>* objectives = nullptr);

}  // namespace difftomo
