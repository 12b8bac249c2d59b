#include "difftomo/nonlinear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "difftomo/error.hpp"

namespace difftomo {

namespace {

constexpr double kArmijoC = 1e-4;
constexpr double kShrink = 0.5;
constexpr int kMaxHalvings = 30;

bool small_change(const std::vector<double>& obj, double rel_tol) {
  if (rel_tol <= 0.0 || obj.size() < 2) return false;
  const double a = obj[obj.size() - 2], b = obj.back();
  return std::abs(a - b) <= rel_tol * std::abs(a);
}

Eigen::MatrixXd select_rows(const Eigen::MatrixXd& m, const std::vector<int>& rows) {
  Eigen::MatrixXd out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = m.row(rows[i]);
  return out;
}

Eigen::VectorXd select(const Eigen::VectorXd& v, const std::vector<int>& rows) {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = v[rows[i]];
  return out;
}

Eigen::MatrixXd sub_block(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
  const int n = static_cast<int>(idx.size());
  Eigen::MatrixXd out(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out(i, j) = m(idx[i], idx[j]);
  return out;
}

struct Step {
  double tau = 0.0;
  Eigen::VectorXd x;
  ValueGradient vg;
};

// Zero of the directional derivative interpolated between 0 and a trial step.
Step quadratic_step(const Objective& obj, const Eigen::VectorXd& x, const ValueGradient& cur,
                    const Eigen::VectorXd& s, double trial) {
  const double d0 = cur.gradient.dot(s);
  Step out;
  if (d0 < 0.0) {
    const Eigen::VectorXd xt = obj.model->project(x + trial * s);
    const ValueGradient vt = objective_and_gradient(obj, xt);
    const double d1 = vt.gradient.dot(s);
    if (d1 > d0) {
      const double tau = trial * d0 / (d0 - d1);
      const Eigen::VectorXd xs = obj.model->project(x + tau * s);
      ValueGradient vs = objective_and_gradient(obj, xs);
      if (vs.value <= cur.value + kArmijoC * tau * d0) return {tau, xs, std::move(vs)};
    }
  }
  out.tau = armijo_step(obj, x, cur.value, cur.gradient, s, trial);
  if (out.tau > 0.0) {
    out.x = obj.model->project(x + out.tau * s);
    out.vg = objective_and_gradient(obj, out.x);
  }
  return out;
}

Step line_step(const Objective& obj, LineSearch ls, const Eigen::VectorXd& x,
               const ValueGradient& cur, const Eigen::VectorXd& s, double tau0) {
  if (ls == LineSearch::Quadratic) return quadratic_step(obj, x, cur, s, tau0);
  Step out;
  out.tau = armijo_step(obj, x, cur.value, cur.gradient, s, tau0);
  if (out.tau > 0.0) {
    out.x = obj.model->project(x + out.tau * s);
    out.vg = objective_and_gradient(obj, out.x);
  }
  return out;
}

}  // namespace

Eigen::VectorXd Model::adjoint(const Eigen::VectorXd& x, const Eigen::VectorXd& w) const {
  return jacobian(x).transpose() * w;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> Model::forward_adjoint(
    const Eigen::VectorXd& x,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& weights) const {
  Eigen::VectorXd f = forward(x);
  Eigen::VectorXd g = adjoint(x, weights(f));
  return {std::move(f), std::move(g)};
}

Eigen::MatrixXd Model::jacobian_rows(const Eigen::VectorXd& x, const std::vector<int>& rows) const {
  return select_rows(jacobian(x), rows);
}

std::vector<std::vector<int>> Model::blocks() const {
  std::vector<int> all(data_count());
  std::iota(all.begin(), all.end(), 0);
  return {all};
}

LinearModel::LinearModel(Eigen::MatrixXd a, Eigen::VectorXd b, std::vector<std::vector<int>> blocks)
    : a_(std::move(a)), b_(std::move(b)), blocks_(std::move(blocks)) {
  if (b_.size() == 0) b_ = Eigen::VectorXd::Zero(a_.rows());
  require(b_.size() == a_.rows(), ErrorKind::InvalidArgument, "offset length mismatch");
  for (const auto& blk : blocks_)
    for (int r : blk)
      require(r >= 0 && r < a_.rows(), ErrorKind::InvalidArgument, "block row out of range");
}

Eigen::VectorXd LinearModel::forward(const Eigen::VectorXd& x) const {
  require(x.size() == a_.cols(), ErrorKind::InvalidArgument, "parameter length mismatch");
  return a_ * x + b_;
}

Eigen::VectorXd LinearModel::adjoint(const Eigen::VectorXd&, const Eigen::VectorXd& w) const {
  return a_.transpose() * w;
}

std::vector<std::vector<int>> LinearModel::blocks() const {
  return blocks_.empty() ? Model::blocks() : blocks_;
}

Prior Prior::gaussian(const Covariance& gamma, const Eigen::VectorXd& mean) {
  const Eigen::VectorXd m = mean.size() ? mean : Eigen::VectorXd::Zero(gamma.size());
  Prior p;
  p.value = [gamma, m](const Eigen::VectorXd& x) { return 0.5 * gamma.norm2_inverse(x - m); };
  p.gradient = [gamma, m](const Eigen::VectorXd& x) { return gamma.apply_inverse(x - m); };
  p.hessian = [gamma](const Eigen::VectorXd& v) { return gamma.apply_inverse(v); };
  return p;
}

Prior Prior::quadratic(const Eigen::MatrixXd& l, const Eigen::VectorXd& mean) {
  require(l.rows() == l.cols(), ErrorKind::InvalidArgument, "prior operator must be square");
  const Eigen::VectorXd m = mean.size() ? mean : Eigen::VectorXd::Zero(l.rows());
  Prior p;
  p.value = [l, m](const Eigen::VectorXd& x) {
    const Eigen::VectorXd d = x - m;
    return 0.5 * d.dot(l * d);
  };
  p.gradient = [l, m](const Eigen::VectorXd& x) -> Eigen::VectorXd { return l * (x - m); };
  p.hessian = [l](const Eigen::VectorXd& v) -> Eigen::VectorXd { return l * v; };
  return p;
}

void Objective::validate() const {
  require(model != nullptr, ErrorKind::InvalidArgument, "objective has no model");
  require(y.size() == model->data_count(), ErrorKind::InvalidData, "data length mismatch");
  require(gamma_e.size() == model->data_count(), ErrorKind::InvalidCovariance,
          "noise covariance size mismatch");
  require(gamma_x.size() == model->parameter_count(), ErrorKind::InvalidCovariance,
          "prior covariance size mismatch");
  require(alpha >= 0.0 && std::isfinite(alpha), ErrorKind::InvalidArgument, "alpha must be >= 0");
}

double Objective::misfit(const Eigen::VectorXd& x) const {
  return 0.5 * gamma_e.norm2_inverse(y - model->forward(x));
}

double Objective::penalty(const Eigen::VectorXd& x) const {
  return prior.value ? prior.value(x) : 0.5 * gamma_x.norm2_inverse(x);
}

Eigen::VectorXd Objective::prior_gradient(const Eigen::VectorXd& x) const {
  return prior.gradient ? prior.gradient(x) : gamma_x.apply_inverse(x);
}

Eigen::VectorXd Objective::prior_hessian(const Eigen::VectorXd& v) const {
  return prior.hessian ? prior.hessian(v) : gamma_x.apply_inverse(v);
}

ValueGradient objective_and_gradient(const Objective& obj, const Eigen::VectorXd& x) {
  obj.validate();
  require(x.size() == obj.model->parameter_count(), ErrorKind::InvalidArgument,
          "parameter length mismatch");
  require(obj.model->admissible(x), ErrorKind::InvalidArgument, "parameters outside the admissible set");
  Eigen::VectorXd w;
  auto weights = [&](const Eigen::VectorXd& f) {
    w = obj.gamma_e.apply_inverse(obj.y - f);
    return w;
  };
  auto [f, adj] = obj.model->forward_adjoint(x, weights);
  ValueGradient out;
  out.value = 0.5 * (obj.y - f).dot(w);
  out.gradient = -adj;
  if (obj.alpha != 0.0) {
    out.value += obj.alpha * obj.penalty(x);
    out.gradient += obj.alpha * obj.prior_gradient(x);
  }
  return out;
}

double armijo_step(const Objective& obj, const Eigen::VectorXd& x, double value,
                   const Eigen::VectorXd& gradient, const Eigen::VectorXd& direction, double tau0) {
  const double slope = gradient.dot(direction);
  if (!(slope < 0.0)) return 0.0;
  double tau = tau0;
  for (int i = 0; i <= kMaxHalvings; ++i, tau *= kShrink) {
    const Eigen::VectorXd xt = obj.model->project(x + tau * direction);
    if (!obj.model->admissible(xt)) continue;
    if (obj.value(xt) <= value + kArmijoC * tau * slope) return tau;
  }
  return 0.0;
}

SolveReport gauss_newton(const Objective& obj, const Eigen::VectorXd& x0, const GnOptions& opts) {
  obj.validate();
  require(obj.alpha > 0.0, ErrorKind::InvalidArgument, "Gauss-Newton needs alpha > 0");
  Eigen::VectorXd x = obj.model->project(x0);
  ValueGradient cur = objective_and_gradient(obj, x);
  SolveReport rep;
  rep.objectives.push_back(cur.value);
  rep.termination = "max-iterations";
  double gamma = opts.mode == GnMode::LevenbergMarquardt ? opts.lm_gamma0 : 0.0;
  const Eigen::MatrixXd& prec_e = obj.gamma_e.precision();

  for (int it = 0; it < opts.max_iterations; ++it) {
    const Eigen::MatrixXd J = obj.model->jacobian(x);
    const Eigen::MatrixXd wj = prec_e * J;
    auto apply_h = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      Eigen::VectorXd out = J.transpose() * (wj * v) + obj.alpha * obj.prior_hessian(v);
      if (gamma > 0.0) out += gamma * v;
      return out;
    };
    const Eigen::VectorXd dx =
        cg_operator(apply_h, -cur.gradient, Eigen::VectorXd::Zero(x.size()), opts.inner).x;
    rep.iterations = it + 1;

    if (opts.mode == GnMode::Plain) {
      x = obj.model->project(x + dx);
      cur = objective_and_gradient(obj, x);
    } else if (opts.mode == GnMode::Damped) {
      const double tau = armijo_step(obj, x, cur.value, cur.gradient, dx);
      if (tau == 0.0) {
        rep.objectives.push_back(cur.value);
        rep.termination = "stagnated";
        break;
      }
      x = obj.model->project(x + tau * dx);
      cur = objective_and_gradient(obj, x);
    } else {
      const Eigen::VectorXd xt = obj.model->project(x + dx);
      const double vt = obj.model->admissible(xt) ? obj.value(xt) : HUGE_VAL;
      if (vt < cur.value) {
        x = xt;
        cur = objective_and_gradient(obj, x);
        gamma /= 10.0;
      } else {
        gamma *= 10.0;
      }
    }
    rep.objectives.push_back(cur.value);
    if (small_change(rep.objectives, opts.rel_tol)) {
      rep.termination = "converged";
      break;
    }
  }
  rep.x = x;
  return rep;
}

SolveReport ncg(const Objective& obj, const Eigen::VectorXd& x0, const NcgOptions& opts) {
  obj.validate();
  Eigen::VectorXd x = obj.model->project(x0);
  ValueGradient cur = objective_and_gradient(obj, x);
  SolveReport rep;
  rep.objectives.push_back(cur.value);
  rep.termination = "max-iterations";
  Eigen::VectorXd pg = obj.gamma_x.apply(cur.gradient);
  Eigen::VectorXd s = -pg;
  double gpg = cur.gradient.dot(pg);
  double tau = 1.0;

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (cur.gradient.norm() <= opts.grad_tol) {
      rep.termination = "converged";
      break;
    }
    if (cur.gradient.dot(s) >= 0.0) s = -pg;
    Step st = line_step(obj, opts.line_search, x, cur, s, tau);
    if (st.tau == 0.0) {
      rep.termination = "stagnated";
      break;
    }
    tau = opts.line_search == LineSearch::Armijo ? std::min(1.0, 2.0 * st.tau) : st.tau;
    x = std::move(st.x);
    const Eigen::VectorXd g_old = cur.gradient;
    cur = std::move(st.vg);
    rep.iterations = it + 1;
    rep.objectives.push_back(cur.value);

    const Eigen::VectorXd pg_new = obj.gamma_x.apply(cur.gradient);
    const double gpg_new = cur.gradient.dot(pg_new);
    double beta = opts.beta == BetaRule::FletcherReeves
                      ? gpg_new / gpg
                      : std::max(0.0, pg_new.dot(cur.gradient - g_old) / gpg);
    if (opts.restart_every > 0 && (it + 1) % opts.restart_every == 0) beta = 0.0;
    s = -pg_new + beta * s;
    pg = pg_new;
    gpg = gpg_new;
    if (small_change(rep.objectives, opts.rel_tol)) {
      rep.termination = "converged";
      break;
    }
  }
  rep.x = x;
  return rep;
}

LbfgsMemory::LbfgsMemory(int capacity) : capacity_(capacity) {
  require(capacity >= 1, ErrorKind::InvalidArgument, "L-BFGS memory must be >= 1");
}

bool LbfgsMemory::push(const Eigen::VectorXd& d, const Eigen::VectorXd& z) {
  const double zd = z.dot(d);
  if (!(zd > 0.0)) return false;
  if (size() == capacity_) {
    d_.pop_front();
    z_.pop_front();
    rho_.pop_front();
  }
  d_.push_back(d);
  z_.push_back(z);
  rho_.push_back(1.0 / zd);
  return true;
}

Eigen::VectorXd LbfgsMemory::apply(
    const Eigen::VectorXd& v, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& h0) const {
  const int m = size();
  std::vector<double> a(m);
  Eigen::VectorXd q = v;
  for (int i = m - 1; i >= 0; --i) {
    a[i] = rho_[i] * d_[i].dot(q);
    q -= a[i] * z_[i];
  }
  Eigen::VectorXd r = h0(q);
  for (int i = 0; i < m; ++i) {
    const double b = rho_[i] * z_[i].dot(r);
    r += (a[i] - b) * d_[i];
  }
  return r;
}

SolveReport lbfgs(const Objective& obj, const Eigen::VectorXd& x0, const LbfgsOptions& opts) {
  obj.validate();
  LbfgsMemory mem(opts.memory);
  auto h0 = [&](const Eigen::VectorXd& v) { return obj.gamma_x.apply(v); };
  Eigen::VectorXd x = obj.model->project(x0);
  ValueGradient cur = objective_and_gradient(obj, x);
  SolveReport rep;
  rep.objectives.push_back(cur.value);
  rep.termination = "max-iterations";

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (cur.gradient.norm() <= opts.grad_tol) {
      rep.termination = "converged";
      break;
    }
    Eigen::VectorXd s = -mem.apply(cur.gradient, h0);
    if (cur.gradient.dot(s) >= 0.0) s = -h0(cur.gradient);
    Step st = line_step(obj, opts.line_search, x, cur, s, 1.0);
    if (st.tau == 0.0) {
      rep.termination = "stagnated";
      break;
    }
    mem.push(st.x - x, st.vg.gradient - cur.gradient);
    x = std::move(st.x);
    cur = std::move(st.vg);
    rep.iterations = it + 1;
    rep.objectives.push_back(cur.value);
    if (small_change(rep.objectives, opts.rel_tol)) {
      rep.termination = "converged";
      break;
    }
  }
  rep.x = x;
  return rep;
}

SolveReport nonlinear_kaczmarz(const Objective& obj, const Eigen::VectorXd& x0,
                               const KaczmarzOptions& opts) {
  obj.validate();
  const auto blocks = obj.model->blocks();
  require(!blocks.empty(), ErrorKind::InvalidArgument, "model has no data blocks");
  const bool regularized = opts.preconditioner == KaczmarzPreconditioner::RegularizedNormal;
  const Eigen::MatrixXd& ge = obj.gamma_e.matrix();
  const Eigen::MatrixXd& gx = obj.gamma_x.matrix();
  std::vector<Eigen::MatrixXd> ge_blocks;
  for (const auto& b : blocks) {
    const Eigen::MatrixXd g = sub_block(ge, b);
    ge_blocks.push_back(regularized ? g : Eigen::MatrixXd(g.inverse()));
  }

  Eigen::VectorXd x = obj.model->project(x0);
  SolveReport rep;
  rep.objectives.push_back(obj.value(x));
  rep.termination = "max-iterations";
  for (int sweep = 0; sweep < opts.sweeps; ++sweep) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const Eigen::VectorXd r = select(obj.y - obj.model->forward(x), blocks[b]);
      if (r.squaredNorm() == 0.0) continue;
      const Eigen::MatrixXd J = obj.model->jacobian_rows(x, blocks[b]);
      Eigen::VectorXd dx;
      if (regularized) {
        const Eigen::MatrixXd gj = gx * J.transpose();
        const Eigen::MatrixXd s = J * gj + obj.alpha * ge_blocks[b];
        dx = gj * s.partialPivLu().solve(r);
      } else {
        dx = J.transpose() * (ge_blocks[b] * r);
      }
      x = obj.model->project(x + opts.relaxation * dx);
    }
    rep.iterations = sweep + 1;
    rep.objectives.push_back(obj.value(x));
    if (small_change(rep.objectives, opts.rel_tol)) {
      rep.termination = "converged";
      break;
    }
  }
  rep.x = x;
  return rep;
}

double icd_step(const Eigen::MatrixXd& a, const Eigen::VectorXd& r, const Covariance& gamma_e,
                const Covariance& gamma_x, double alpha, const Eigen::VectorXd& x, int k) {
  require(k >= 0 && k < a.cols(), ErrorKind::InvalidArgument, "coordinate out of range");
  const Eigen::VectorXd wa = gamma_e.apply_inverse(a.col(k));
  const Eigen::MatrixXd& px = gamma_x.precision();
  const double num = r.dot(wa) - alpha * px.row(k).dot(x);
  const double den = a.col(k).dot(wa) + alpha * px(k, k);
  require(den > 0.0, ErrorKind::SingularSystem, "coordinate has no curvature");
  return num / den;
}

Eigen::VectorXd icd_sweep(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                          const Covariance& gamma_e, const Covariance& gamma_x, double alpha,
                          const Eigen::VectorXd& x0, std::uint64_t seed,
                          std::vector<double>* objectives) {
  require(y.size() == a.rows() && x0.size() == a.cols(), ErrorKind::InvalidArgument,
          "ICD shapes do not match");
  require(gamma_e.size() == a.rows() && gamma_x.size() == a.cols(), ErrorKind::InvalidCovariance,
          "ICD covariance sizes do not match");
  require(alpha >= 0.0, ErrorKind::InvalidArgument, "alpha must be >= 0");
  const Eigen::MatrixXd& pe = gamma_e.precision();
  const Eigen::MatrixXd& px = gamma_x.precision();
  const Eigen::MatrixXd wa = pe * a;
  Eigen::VectorXd x = x0;
  Eigen::VectorXd r = y - a * x;
  Eigen::VectorXd px_x = px * x;
  auto value = [&] { return 0.5 * r.dot(pe * r) + 0.5 * alpha * x.dot(px_x); };
  if (objectives) objectives->push_back(value());

  std::vector<int> order(a.cols());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (int k : order) {
    const double den = a.col(k).dot(wa.col(k)) + alpha * px(k, k);
    if (den <= 0.0) continue;
    const double tau = (r.dot(wa.col(k)) - alpha * px_x[k]) / den;
    x[k] += tau;
    r -= tau * a.col(k);
    px_x += tau * px.col(k);
    if (objectives) objectives->push_back(value());
  }
  return x;
}

}  // namespace difftomo
