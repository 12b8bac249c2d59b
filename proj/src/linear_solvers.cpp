#include "difftomo/linear_solvers.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

void check_problem(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                   const Covariance& ge, const Covariance& gx) {
  require(a.rows() > 0 && a.cols() > 0, ErrorKind::InvalidArgument, "empty system matrix");
  require(y.size() == a.rows(), ErrorKind::InvalidArgument, "data length does not match A");
  require(ge.size() == a.rows() && gx.size() == a.cols(), ErrorKind::InvalidArgument,
          "covariance sizes do not match A");
  require(std::isfinite(alpha) && alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be non-negative");
  require(a.allFinite() && y.allFinite(), ErrorKind::InvalidArgument, "non-finite input");
}

bool stalled(const std::vector<double>& obj, double rel_tol) {
  if (rel_tol <= 0.0 || obj.size() < 2) return false;
  const double prev = obj[obj.size() - 2], cur = obj.back();
  return std::abs(prev - cur) <= rel_tol * std::abs(prev);
}

Eigen::VectorXd start_point(const Eigen::VectorXd& x0, int n, double fill) {
  if (x0.size() == 0) return Eigen::VectorXd::Constant(n, fill);
  require(x0.size() == n, ErrorKind::InvalidArgument, "initial guess has wrong length");
  return x0;
}

}  // namespace

void write_report(const SolveReport& report, const std::string& path) {
  std::ofstream f(path);
  require(f.good(), ErrorKind::InvalidArgument, "cannot open " + path);
  f << std::setprecision(17) << "iteration,objective\n";
  for (std::size_t i = 0; i < report.objectives.size(); ++i) f << i << ',' << report.objectives[i] << '\n';
}

double CanonicalForm::objective(const Eigen::VectorXd& xt, double alpha) const {
  return 0.5 * (y_tilde - a_tilde * xt).squaredNorm() + 0.5 * alpha * xt.squaredNorm();
}

CanonicalForm canonical_transform(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                  const Covariance& gamma_e, const Covariance& gamma_x) {
  check_problem(a, y, 0.0, gamma_e, gamma_x);
  CanonicalForm c{Eigen::MatrixXd(), Eigen::VectorXd(), gamma_e, gamma_x};
  Eigen::MatrixXd la = gamma_e.is_diagonal() ? Eigen::MatrixXd(gamma_e.factor().diagonal().asDiagonal() * a)
                                             : Eigen::MatrixXd(gamma_e.factor() * a);
  c.a_tilde = gamma_x.is_diagonal() ? Eigen::MatrixXd(la * gamma_x.factor_inverse().diagonal().asDiagonal())
                                    : Eigen::MatrixXd(la * gamma_x.factor_inverse());
  c.y_tilde = gamma_e.whiten(y);
  return c;
}

Eigen::MatrixXd stack_real(const Eigen::MatrixXcd& a) {
  Eigen::MatrixXd out(2 * a.rows(), a.cols());
  out << a.real(), a.imag();
  return out;
}

Eigen::VectorXd stack_real(const Eigen::VectorXcd& v) {
  Eigen::VectorXd out(2 * v.size());
  out << v.real(), v.imag();
  return out;
}

Eigen::VectorXd tikhonov_newton(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                                const Covariance& ge, const Covariance& gx, TikhonovMode mode) {
  check_problem(a, y, alpha, ge, gx);
  if (mode == TikhonovMode::Auto)
    mode = a.rows() >= a.cols() ? TikhonovMode::Overdetermined : TikhonovMode::Underdetermined;
  if (mode == TikhonovMode::Overdetermined) {
    const Eigen::MatrixXd wa = ge.is_diagonal() ? Eigen::MatrixXd(ge.precision().diagonal().asDiagonal() * a)
                                                : Eigen::MatrixXd(ge.precision() * a);
    const Eigen::MatrixXd h = a.transpose() * wa + alpha * gx.precision();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    require(ldlt.info() == Eigen::Success && ldlt.isPositive(), ErrorKind::SingularSystem,
            "normal matrix is not positive definite");
    Eigen::VectorXd x = ldlt.solve(wa.transpose() * y);
    require(x.allFinite(), ErrorKind::SingularSystem, "normal equations are singular");
    return x;
  }
  const Eigen::MatrixXd gat = gx.matrix() * a.transpose();
  const Eigen::MatrixXd s = a * gat + alpha * ge.matrix();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive(), ErrorKind::SingularSystem,
          "data-space matrix is not positive definite");
  Eigen::VectorXd x = gat * ldlt.solve(y);
  require(x.allFinite(), ErrorKind::SingularSystem, "data-space system is singular");
  return x;
}

double lipschitz_estimate(const Eigen::MatrixXd& at, double alpha) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(at.cols()) / std::sqrt(static_cast<double>(at.cols()));
  double lam = 0.0;
  for (int i = 0; i < 50; ++i) {
    Eigen::VectorXd w = at.transpose() * (at * v) + alpha * v;
    lam = w.norm();
    if (lam == 0.0) break;
    v = w / lam;
  }
  return lam / 0.9;
}

SolveReport gradient_iterate(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                             const Covariance& ge, const Covariance& gx, const GradientOptions& opts,
                             const Eigen::VectorXd& x0) {
  check_problem(a, y, alpha, ge, gx);
  const CanonicalForm cf = canonical_transform(a, y, ge, gx);
  double tau = opts.tau;
  if (opts.method == GradientMethod::Landweber) {
    const double L = lipschitz_estimate(cf.a_tilde, alpha);
    if (tau == 0.0) tau = 1.0 / L;
    require(tau > 0.0 && tau < 2.0 / L, ErrorKind::InvalidArgument,
            "Landweber step must satisfy 0 < tau < 2/L");
  }
  Eigen::VectorXd xt = cf.to_canonical(start_point(x0, static_cast<int>(a.cols()), 0.0));
  SolveReport rep;
  rep.objectives.push_back(cf.objective(xt, alpha));
  const double gscale = std::max(1e-300, (cf.a_tilde.transpose() * cf.y_tilde).norm());
  rep.termination = "max-iterations";
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd s = cf.a_tilde.transpose() * (cf.y_tilde - cf.a_tilde * xt) - alpha * xt;
    if (s.norm() <= 1e-14 * gscale) {
      rep.termination = "converged";
      break;
    }
    double step = tau;
    if (opts.method == GradientMethod::Steepest)
      step = s.squaredNorm() / ((cf.a_tilde * s).squaredNorm() + alpha * s.squaredNorm());
    xt += step * s;
    rep.objectives.push_back(cf.objective(xt, alpha));
    rep.iterations = it + 1;
    if (stalled(rep.objectives, opts.rel_tol)) {
      rep.termination = "stagnated";
      break;
    }
  }
  rep.x = cf.to_original(xt);
  return rep;
}

SolveReport cg_operator(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& apply_h,
                        const Eigen::VectorXd& b, const Eigen::VectorXd& x0, const CgOptions& opts) {
  Eigen::VectorXd x = x0.size() ? x0 : Eigen::VectorXd::Zero(b.size());
  auto quad = [&](const Eigen::VectorXd& v) { return 0.5 * v.dot(apply_h(v)) - b.dot(v); };
  SolveReport rep;
  rep.objectives.push_back(quad(x));
  Eigen::VectorXd s = b - apply_h(x);
  Eigen::VectorXd p = s;
  const double s0 = std::max(s.norm(), 1e-300 + b.norm() * 1e-300);
  rep.termination = "max-iterations";
  if (s.norm() == 0.0) rep.termination = "converged";
  for (int it = 0; it < opts.max_iterations && rep.termination != "converged"; ++it) {
    const Eigen::VectorXd hp = apply_h(p);
    const double php = p.dot(hp);
    require(php > 0.0, ErrorKind::SingularSystem, "operator is not positive definite");
    const double tau = s.squaredNorm() / php;
    x += tau * p;
    Eigen::VectorXd s_new = s - tau * hp;
    rep.objectives.push_back(quad(x));
    rep.iterations = it + 1;
    if (s_new.norm() <= opts.tol * s0) {
      rep.termination = "converged";
      break;
    }
    double beta;
    if (opts.beta == BetaRule::FletcherReeves)
      beta = s_new.squaredNorm() / s.squaredNorm();
    else
      beta = s_new.dot(s_new - s) / s.squaredNorm();
    p = s_new + beta * p;
    s = std::move(s_new);
    if (stalled(rep.objectives, opts.rel_tol)) {
      rep.termination = "stagnated";
      break;
    }
  }
  rep.x = x;
  return rep;
}

SolveReport cg_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, double alpha,
                     const Covariance& ge, const Covariance& gx, const CgOptions& opts,
                     const Eigen::VectorXd& x0) {
  check_problem(a, y, alpha, ge, gx);
  const CanonicalForm cf = canonical_transform(a, y, ge, gx);
  const Eigen::MatrixXd& at = cf.a_tilde;
  auto h = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return at.transpose() * (at * v) + alpha * v;
  };
  const Eigen::VectorXd xt0 = cf.to_canonical(start_point(x0, static_cast<int>(a.cols()), 0.0));
  SolveReport rep = cg_operator(h, at.transpose() * cf.y_tilde, xt0, opts);
  // report the Tikhonov functional rather than the shifted quadratic
  const double shift = 0.5 * cf.y_tilde.squaredNorm();
  for (double& o : rep.objectives) o += shift;
  rep.x = cf.to_original(rep.x);
  return rep;
}

std::vector<Eigen::VectorXd> krylov_basis(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                                          double alpha, const Covariance& ge, const Covariance& gx,
                                          int count) {
  check_problem(a, y, alpha, ge, gx);
  require(count >= 1, ErrorKind::InvalidArgument, "basis size must be at least one");
  auto h = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return gx.apply(a.transpose() * ge.apply_inverse(a * v));
  };
  std::vector<Eigen::VectorXd> out;
  Eigen::VectorXd power = gx.apply(a.transpose() * ge.apply_inverse(y));
  out.push_back(power);
  for (int j = 1; j < count; ++j) {
    power = h(power);
    out.push_back(power + alpha * out.back());
  }
  return out;
}

RowColumnWeights row_column_weights(const Eigen::MatrixXd& a) {
  RowColumnWeights w;
  w.r1 = a.cwiseAbs().rowwise().sum();
  w.c1 = a.cwiseAbs().colwise().sum().transpose();
  w.r2 = a.rowwise().squaredNorm();
  w.c2 = a.colwise().squaredNorm().transpose();
  return w;
}

SolveReport row_action(const Eigen::MatrixXd& a, const Eigen::VectorXd& y, const RowOptions& opts,
                       const Eigen::VectorXd& x0) {
  require(a.rows() > 0 && a.cols() > 0 && y.size() == a.rows(), ErrorKind::InvalidArgument,
          "system shape mismatch");
  require(opts.tau > 0.0, ErrorKind::InvalidArgument, "relaxation must be positive");
  if (opts.method == RowMethod::SART)
    require(a.minCoeff() >= 0.0, ErrorKind::InvalidArgument, "SART requires a non-negative matrix");
  const RowColumnWeights w = row_column_weights(a);
  auto safe_inv = [](const Eigen::VectorXd& v) {
    return v.unaryExpr([](double t) { return t > 0.0 ? 1.0 / t : 0.0; }).eval();
  };
  const Eigen::VectorXd r1i = safe_inv(w.r1), c1i = safe_inv(w.c1), r2i = safe_inv(w.r2);
  Eigen::VectorXd x = start_point(x0, static_cast<int>(a.cols()), 0.0);
  auto obj = [&](const Eigen::VectorXd& v) { return 0.5 * (y - a * v).squaredNorm(); };
  SolveReport rep;
  rep.objectives.push_back(obj(x));
  rep.termination = "max-iterations";
  std::mt19937_64 rng(opts.seed);
  std::vector<int> order(a.rows());
  std::iota(order.begin(), order.end(), 0);
  for (int sweep = 0; sweep < opts.max_iterations; ++sweep) {
    switch (opts.method) {
      case RowMethod::ART:
        std::shuffle(order.begin(), order.end(), rng);
        for (int i : order) {
          if (w.r2[i] == 0.0) continue;
          x += opts.tau * (y[i] - a.row(i).dot(x)) * r2i[i] * a.row(i).transpose();
        }
        break;
      case RowMethod::SART:
        x += opts.tau * c1i.cwiseProduct(a.transpose() * r1i.cwiseProduct(y - a * x));
        break;
      case RowMethod::SIRT:
        x += opts.tau * (a.transpose() * r2i.cwiseProduct(y - a * x));
        break;
    }
    rep.objectives.push_back(obj(x));
    rep.iterations = sweep + 1;
    if (rep.objectives.back() == 0.0) {
      rep.termination = "converged";
      break;
    }
    if (stalled(rep.objectives, opts.rel_tol)) {
      rep.termination = "stagnated";
      break;
    }
  }
  rep.x = x;
  return rep;
}

double kl_divergence(const Eigen::VectorXd& y, const Eigen::VectorXd& ax) {
  double s = 0.0;
  for (int i = 0; i < y.size(); ++i) s += y[i] * std::log(y[i] / ax[i]) - y[i] + ax[i];
  return s;
}

SolveReport multiplicative(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                           const MultiplicativeOptions& opts, const Eigen::VectorXd& x0) {
  require(a.rows() > 0 && a.cols() > 0 && y.size() == a.rows(), ErrorKind::InvalidArgument,
          "system shape mismatch");
  for (int i = 0; i < y.size(); ++i)
    require(std::isfinite(y[i]) && y[i] > 0.0, ErrorKind::InvalidArgument,
            "nonnegativity violation: data entry " + std::to_string(i) +
                " is not strictly positive");
  require(a.allFinite() && a.minCoeff() >= 0.0, ErrorKind::InvalidArgument,
          "nonnegativity violation: system matrix has negative entries");
  const Eigen::VectorXd colsum = a.colwise().sum().transpose();
  require(colsum.minCoeff() > 0.0, ErrorKind::InvalidArgument, "system matrix has an empty column");
  if (opts.method == MultiplicativeMethod::MAPEM)
    require(static_cast<bool>(opts.prior_grad) && opts.alpha >= 0.0, ErrorKind::InvalidArgument,
            "MAP-EM needs a prior gradient and alpha >= 0");
  Eigen::VectorXd x = start_point(x0, static_cast<int>(a.cols()), 1.0);
  require(x.minCoeff() > 0.0, ErrorKind::InvalidArgument,
          "nonnegativity violation: initial guess must be strictly positive");

  SolveReport rep;
  Eigen::VectorXd ax = a * x;
  rep.objectives.push_back(kl_divergence(y, ax));
  rep.termination = "max-iterations";
  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::VectorXd ratio = y.cwiseQuotient(ax);
    switch (opts.method) {
      case MultiplicativeMethod::MART: {
        const Eigen::VectorXd e = a.transpose() * ratio.array().log().matrix();
        x = x.cwiseProduct((opts.relaxation * e).array().exp().matrix());
        break;
      }
      case MultiplicativeMethod::MLEM:
        x = x.cwiseQuotient(colsum).cwiseProduct(a.transpose() * ratio);
        break;
      case MultiplicativeMethod::MAPEM: {
        Eigen::VectorXd denom = colsum + opts.alpha * opts.prior_grad(x);
        // one-step-late denominators are kept away from zero
        denom = denom.cwiseMax(1e-3 * colsum);
        x = x.cwiseQuotient(denom).cwiseProduct(a.transpose() * ratio);
        break;
      }
    }
    require(x.allFinite(), ErrorKind::InternalError, "multiplicative update diverged");
    ax = a * x;
    rep.objectives.push_back(kl_divergence(y, ax));
    rep.iterations = it + 1;
    if (stalled(rep.objectives, opts.rel_tol)) {
      rep.termination = "stagnated";
      break;
    }
  }
  rep.x = x;
  return rep;
}

}  // namespace difftomo
