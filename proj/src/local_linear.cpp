#include "wgf/local_linear.hpp"

#include "parallel_map.hpp"
#include "wgf/kernel.hpp"
#include "wgf/nw_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace wgf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool uses_exp(DivergenceId mirror) { return mirror == DivergenceId::ForwardKL; }

// Conjugate at d with the estimator-side guards: +inf value outside the
// domain, and above the clamp the exponential continues as its second-order
// Taylor expansion.
ConjugateValue guarded_conjugate(DivergenceId mirror, const Interval& dom, double clamp, double d) {
  if (!dom.contains(d)) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {std::numeric_limits<double>::infinity(), nan, nan};
  }
  if (uses_exp(mirror) && d > clamp) {
    const double e = conjugate_all(mirror, clamp).value;
    const double t = d - clamp;
    return {e * (1.0 + t + 0.5 * t * t), e * (1.0 + t), e};
  }
  return conjugate_all(mirror, d);
}

double slope_penalty(double ridge, double sigma, Eigen::Index np, Eigen::Index nq) {
  return ridge * sigma * sigma * 2.0 / static_cast<double>(np + nq);
}

std::string query_label(Eigen::Index index) { return "query " + std::to_string(index); }

void check_inputs(const Matrix& dp, const Matrix& dq, Eigen::Index query_dim, const char* what) {
  require_nonempty(dp, what);
  require_nonempty(dq, what);
  require_same_dim(dp, dq, what);
  if (dp.cols() != query_dim) throw ShapeError(std::string(what) + ": query dimension does not match samples");
}

void require_mass(const Neighborhood& nb, Eigen::Index index, const char* what) {
  if (!(nb.mass_q >= kDenominatorFloor)) {
    throw DegenerateNeighborhood(index, std::string(what) + ": " + query_label(index) +
                                            " has no particle samples within kernel reach");
  }
}

}  // namespace

void FitOptions::validate() const {
  require_positive_sigma(sigma);
  if (max_iters < 1) throw UsageError("max_iters must be at least 1");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (!(tol > 0.0)) throw UsageError("tol must be positive");
  if (!(clamp > 0.0)) throw UsageError("clamp must be positive");
  if (!(weight_floor >= 0.0)) throw UsageError("weight_floor must be nonnegative");
}

Neighborhood gather_neighborhood(RowRef query, const Matrix& dp, const Matrix& dq, double sigma,
                                 double weight_floor) {
  const Eigen::Index d = query.size();
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  auto gather = [&](const Matrix& x, Eigen::MatrixXd& u, Eigen::VectorXd& k) {
    const Eigen::ArrayXd weight = ((x.rowwise() - query).rowwise().squaredNorm().array() * -inv_2s2).exp();
    Eigen::Index m = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) m += weight(i) >= weight_floor && weight(i) > 0.0 ? 1 : 0;
    const double inv_n = 1.0 / static_cast<double>(x.rows());
    u.resize(m, d + 1);
    k.resize(m);
    Eigen::Index r = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (!(weight(i) >= weight_floor && weight(i) > 0.0)) continue;
      for (Eigen::Index c = 0; c < d; ++c) u(r, c) = x(i, c) - query(c);
      u(r, d) = 1.0;
      k(r) = weight(i) * inv_n;
      ++r;
    }
    return k.sum();
  };
  Neighborhood nb;
  nb.mass_p = gather(dp, nb.up, nb.kp);
  nb.mass_q = gather(dq, nb.uq, nb.kq);
  return nb;
}

LocalObjective::LocalObjective(RowRef query, const Matrix& dp, const Matrix& dq, DivergenceId field,
                               const FitOptions& opts)
    : query_(query), mirror_(mirror_of(field)), clamp_(opts.clamp) {
  opts.validate();
  check_inputs(dp, dq, query.size(), "local objective");
  nb_ = gather_neighborhood(query, dp, dq, opts.sigma, opts.weight_floor);
  grad_p_ = nb_.up.transpose() * nb_.kp;
  penalty_ = slope_penalty(opts.slope_ridge, opts.sigma, dp.rows(), dq.rows());
}

Eigen::VectorXd LocalObjective::to_centered(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = query_.size();
  Eigen::VectorXd c = theta;
  c(d) = theta(d) + theta.head(d).dot(query_.transpose());
  return c;
}

Eigen::VectorXd LocalObjective::from_centered(const Eigen::VectorXd& theta_c) const {
  const Eigen::Index d = query_.size();
  Eigen::VectorXd t = theta_c;
  t(d) = theta_c(d) - theta_c.head(d).dot(query_.transpose());
  return t;
}

bool LocalObjective::evaluate_centered(const Eigen::VectorXd& theta_c, double& value, Eigen::VectorXd* gradient,
                                       Eigen::MatrixXd* hessian) const {
  const Interval dom = conj_domain(mirror_);
  const Eigen::Index dim = query_.size();
  const Eigen::VectorXd dvals = nb_.uq * theta_c;
  Eigen::VectorXd first(dvals.size());
  Eigen::VectorXd second(dvals.size());
  double s = 0.0;
  if (uses_exp(mirror_)) {
    // Vectorized exp; value = prime = second below the clamp.
    const Eigen::ArrayXd e = (dvals.array().min(clamp_) - 1.0).exp();
    first = nb_.kq.array() * e;
    second = first;
    Eigen::ArrayXd val = e;
    for (Eigen::Index i = 0; i < dvals.size(); ++i) {
      if (dvals(i) > clamp_) {
        const ConjugateValue c = guarded_conjugate(mirror_, dom, clamp_, dvals(i));
        val(i) = c.value;
        first(i) = nb_.kq(i) * c.prime;
      }
    }
    s = (nb_.kq.array() * val).sum();
  } else {
    for (Eigen::Index i = 0; i < dvals.size(); ++i) {
      const ConjugateValue c = guarded_conjugate(mirror_, dom, clamp_, dvals(i));
      if (std::isinf(c.value)) {
        value = kNegInf;
        return false;
      }
      s += nb_.kq(i) * c.value;
      first(i) = nb_.kq(i) * c.prime;
      second(i) = nb_.kq(i) * c.second;
    }
  }
  const double wsq = theta_c.head(dim).squaredNorm();
  value = grad_p_.dot(theta_c) - s - 0.5 * penalty_ * wsq;
  if (gradient != nullptr) {
    *gradient = grad_p_ - nb_.uq.transpose() * first;
    gradient->head(dim) -= penalty_ * theta_c.head(dim);
  }
  if (hessian != nullptr) {
    // Lazy product: the result is tiny, a GEMM call costs more than the dots.
    const Eigen::MatrixXd scaled = second.asDiagonal() * nb_.uq;
    *hessian = -(nb_.uq.transpose().lazyProduct(scaled));
    hessian->diagonal().head(dim).array() -= penalty_;
  }
  return true;
}

double LocalObjective::value_centered(const Eigen::VectorXd& theta_c) const {
  double v = 0.0;
  evaluate_centered(theta_c, v, nullptr, nullptr);
  return v;
}

Eigen::VectorXd LocalObjective::gradient_centered(const Eigen::VectorXd& theta_c) const {
  double v = 0.0;
  Eigen::VectorXd g;
  if (!evaluate_centered(theta_c, v, &g, nullptr)) {
    return Eigen::VectorXd::Constant(theta_c.size(), std::numeric_limits<double>::quiet_NaN());
  }
  return g;
}

Eigen::MatrixXd LocalObjective::hessian_centered(const Eigen::VectorXd& theta_c) const {
  double v = 0.0;
  Eigen::MatrixXd h;
  if (!evaluate_centered(theta_c, v, nullptr, &h)) {
    return Eigen::MatrixXd::Constant(theta_c.size(), theta_c.size(), std::numeric_limits<double>::quiet_NaN());
  }
  return h;
}

double LocalObjective::value(const Eigen::VectorXd& theta) const { return value_centered(to_centered(theta)); }

Eigen::VectorXd LocalObjective::gradient(const Eigen::VectorXd& theta) const {
  // theta_c = T theta with T = [[I, 0], [x*^T, 1]]; the gradient pulls back by T^T.
  const Eigen::Index d = query_.size();
  Eigen::VectorXd g = gradient_centered(to_centered(theta));
  g.head(d) += g(d) * query_.transpose();
  return g;
}

Eigen::MatrixXd LocalObjective::hessian(const Eigen::VectorXd& theta) const {
  const Eigen::Index d = query_.size();
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(d + 1, d + 1);
  t.block(d, 0, 1, d) = query_;
  return t.transpose() * hessian_centered(to_centered(theta)) * t;
}

ConjugateValue estimator_conjugate(DivergenceId field, double d, double clamp) {
  const DivergenceId mirror = mirror_of(field);
  return guarded_conjugate(mirror, conj_domain(mirror), clamp, d);
}

double initial_intercept(DivergenceId field, double ratio) {
  const DivergenceId mirror = mirror_of(field);
  const double fallback = conj_domain(mirror).hi <= 0.0 ? -1.0 : 0.0;
  if (!(ratio > 0.0) || !std::isfinite(ratio)) return fallback;
  double b = fallback;
  switch (mirror) {
    case DivergenceId::ForwardKL: b = 1.0 + std::log(ratio); break;
    case DivergenceId::PearsonChi2: b = ratio - 1.0; break;
    case DivergenceId::BackwardKL: b = -1.0 / ratio; break;
    case DivergenceId::Cubic: b = 0.5 * (ratio * ratio - 1.0); break;
    case DivergenceId::NeymanChi2: break;
  }
  return std::isfinite(b) ? b : fallback;
}

namespace {

struct SolverResult {
  Eigen::VectorXd theta_c;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  double grad_norm = 0.0;
};

bool armijo_ok(double candidate, double current, double slope, double t) {
  if (!std::isfinite(candidate)) return false;
  if (candidate >= current + 1e-4 * t * slope) return true;
  // Near the optimum the predicted gain is below rounding of the objective.
  return candidate >= current - 64.0 * std::numeric_limits<double>::epsilon() * std::abs(current) &&
         t * slope <= 1e3 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(current));
}

SolverResult newton_ascent(const LocalObjective& obj, Eigen::VectorXd theta, const FitOptions& opts,
                           FitTrace* trace) {
  const double mass = obj.neighborhood().mass_q;
  const Eigen::Index p = theta.size();
  SolverResult out;
  double f = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd h;
  if (!obj.evaluate_centered(theta, f, &g, &h) || !std::isfinite(f)) {
    throw OptimizerDivergence("local fit: objective is not finite at the initial point");
  }
  for (int it = 0; it < opts.max_iters; ++it) {
    if (!g.allFinite()) throw OptimizerDivergence("local fit: non-finite gradient");
    out.grad_norm = g.norm() / mass;
    out.iterations = it;
    if (out.grad_norm <= opts.tol) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd a = -h;
    const double damping = 1e-12 * std::max(a.trace(), 0.0) + 1e-14 * mass;
    Eigen::VectorXd dir = (a + damping * Eigen::MatrixXd::Identity(p, p)).ldlt().solve(g);
    bool newton_dir = true;
    if (!dir.allFinite() || g.dot(dir) <= 0.0) {
      dir = g / mass;
      newton_dir = false;
    }
    bool accepted = false;
    double fc = 0.0;
    Eigen::VectorXd gc;
    Eigen::MatrixXd hc;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const double slope = g.dot(dir);
      double t = 1.0;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        const Eigen::VectorXd cand = theta + t * dir;
        // Derivatives come almost free with the value, and a full step is usually accepted.
        if (obj.evaluate_centered(cand, fc, &gc, &hc) && armijo_ok(fc, f, slope, t)) {
          theta = cand;
          accepted = true;
          break;
        }
      }
      if (!accepted && newton_dir) {
        dir = g / mass;
        newton_dir = false;
      } else {
        break;
      }
    }
    out.iterations = it + 1;
    if (!accepted) break;
    f = fc;
    g = std::move(gc);
    h = std::move(hc);
    if (trace != nullptr) trace->objective.push_back(f);
  }
  if (!out.converged) {
    out.grad_norm = g.norm() / mass;
    out.converged = out.grad_norm <= opts.tol;
  }
  out.theta_c = theta;
  out.value = f;
  return out;
}

SolverResult adam_ascent(const LocalObjective& obj, Eigen::VectorXd theta, const FitOptions& opts,
                         FitTrace* trace) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  const double mass = obj.neighborhood().mass_q;
  SolverResult out;
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(theta.size());
  double b1 = 1.0;
  double b2 = 1.0;
  if (!std::isfinite(obj.value_centered(theta))) {
    throw OptimizerDivergence("local fit: objective is not finite at the initial point");
  }
  for (int it = 0; it < opts.max_iters; ++it) {
    const Eigen::VectorXd g = obj.gradient_centered(theta) / mass;
    if (!g.allFinite()) throw OptimizerDivergence("local fit: non-finite gradient");
    out.grad_norm = g.norm();
    out.iterations = it;
    if (out.grad_norm <= opts.tol) {
      out.converged = true;
      break;
    }
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
    b1 *= kBeta1;
    b2 *= kBeta2;
    Eigen::VectorXd step =
        opts.learning_rate * (m / (1.0 - b1)).cwiseQuotient(((v / (1.0 - b2)).cwiseSqrt().array() + kEps).matrix());
    // Halve steps that would leave the conjugate domain.
    double f = obj.value_centered(theta + step);
    for (int h = 0; h < 60 && !std::isfinite(f); ++h) {
      step *= 0.5;
      f = obj.value_centered(theta + step);
    }
    if (!std::isfinite(f)) throw OptimizerDivergence("local fit: objective left the conjugate domain");
    theta += step;
    if (trace != nullptr) trace->objective.push_back(f);
    out.iterations = it + 1;
  }
  if (!out.converged) {
    out.grad_norm = obj.gradient_centered(theta).norm() / mass;
    out.converged = out.grad_norm <= opts.tol;
  }
  out.theta_c = theta;
  out.value = obj.value_centered(theta);
  return out;
}

LocalFit make_fit(const LocalObjective& obj, RowRef query, const Eigen::VectorXd& theta_c, double value) {
  const Eigen::Index d = query.size();
  const Eigen::VectorXd theta = obj.from_centered(theta_c);
  LocalFit fit;
  fit.w = theta.head(d).transpose();
  fit.b = theta(d);
  fit.d_query = theta_c(d);
  fit.query = query;
  fit.objective_value = value;
  return fit;
}

}  // namespace

LocalFit fit_one(RowRef query, const Matrix& dp, const Matrix& dq, DivergenceId field, const FitOptions& opts,
                 FitTrace* trace, Eigen::Index query_index) {
  opts.validate();
  const LocalObjective obj(query, dp, dq, field, opts);
  require_mass(obj.neighborhood(), query_index, "local fit");
  const Eigen::Index d = query.size();
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  const Neighborhood& nb = obj.neighborhood();
  const double ratio = nb.mass_p / nb.mass_q;
  theta(d) = initial_intercept(field, ratio);
  const SolverResult res = opts.optimizer == Optimizer::Newton ? newton_ascent(obj, theta, opts, trace)
                                                               : adam_ascent(obj, theta, opts, trace);
  LocalFit fit = make_fit(obj, query, res.theta_c, res.value);
  if (!std::isfinite(fit.objective_value) || !fit.w.allFinite() || !std::isfinite(fit.b)) {
    throw OptimizerDivergence("local fit: " + query_label(query_index) + " produced a non-finite solution");
  }
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.grad_norm = res.grad_norm;
  return fit;
}

std::vector<LocalFit> fit_batch(const Matrix& queries, const Matrix& dp, const Matrix& dq, DivergenceId field,
                                const FitOptions& opts, Exec exec) {
  opts.validate();
  check_inputs(dp, dq, queries.cols(), "fit_batch");
  std::vector<LocalFit> out(static_cast<std::size_t>(queries.rows()));
  detail::parallel_for(queries.rows(), exec, [&](Eigen::Index j) {
    out[static_cast<std::size_t>(j)] = fit_one(queries.row(j), dp, dq, field, opts, nullptr, j);
  });
  return out;
}

LocalFit solve_quadratic(RowRef query, const Matrix& dp, const Matrix& dq, double sigma,
                         std::optional<double> ridge, double weight_floor, Eigen::Index query_index,
                         double slope_ridge) {
  require_positive_sigma(sigma);
  check_inputs(dp, dq, query.size(), "solve_quadratic");
  if (ridge && !(*ridge >= 0.0)) throw UsageError("solve_quadratic: ridge must be nonnegative");
  FitOptions opts;
  opts.sigma = sigma;
  opts.weight_floor = weight_floor;
  opts.slope_ridge = slope_ridge;
  const LocalObjective obj(query, dp, dq, DivergenceId::ForwardKL, opts);
  const Neighborhood& nb = obj.neighborhood();
  require_mass(nb, query_index, "solve_quadratic");

  const Eigen::Index dim = query.size();
  const Eigen::MatrixXd scaled = nb.kq.asDiagonal() * nb.uq;
  Eigen::MatrixXd a = nb.uq.transpose().lazyProduct(scaled);
  a.diagonal().head(dim).array() += slope_penalty(slope_ridge, sigma, dp.rows(), dq.rows());
  const Eigen::VectorXd rhs = nb.up.transpose() * nb.kp - nb.uq.transpose() * nb.kq;
  const double rho = ridge ? *ridge : 1e-9 * a.trace();
  a.diagonal().array() += rho;

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const double hi = eig.eigenvalues().maxCoeff();
  const double lo = eig.eigenvalues().minCoeff();
  if (!(hi > 0.0) || lo <= 1e-13 * hi) {
    throw RankDeficient("solve_quadratic: weighted normal equations are singular at " + query_label(query_index) +
                        " (add a ridge or widen sigma)");
  }
  const Eigen::VectorXd theta_c = a.ldlt().solve(rhs);
  LocalFit fit = make_fit(obj, query, theta_c, obj.value_centered(theta_c));
  const Eigen::VectorXd g = (rhs - a * theta_c);
  fit.grad_norm = g.norm() / nb.mass_q;
  fit.converged = true;
  fit.iterations = 1;
  return fit;
}

std::vector<LocalFit> fit_field(const Matrix& queries, const Matrix& dp, const Matrix& dq, DivergenceId field,
                                const FitOptions& opts, Exec exec) {
  if (field != DivergenceId::ForwardKL) return fit_batch(queries, dp, dq, field, opts, exec);
  opts.validate();
  check_inputs(dp, dq, queries.cols(), "velocity_field");
  std::vector<LocalFit> out(static_cast<std::size_t>(queries.rows()));
  detail::parallel_for(queries.rows(), exec, [&](Eigen::Index j) {
    out[static_cast<std::size_t>(j)] =
        solve_quadratic(queries.row(j), dp, dq, opts.sigma, std::nullopt, opts.weight_floor, j,
                        opts.slope_ridge);
  });
  return out;
}

Matrix velocity_field(const Matrix& queries, const Matrix& dp, const Matrix& dq, DivergenceId field,
                      const FitOptions& opts, Exec exec) {
  const std::vector<LocalFit> fits = fit_field(queries, dp, dq, field, opts, exec);
  Matrix v(queries.rows(), queries.cols());
  for (Eigen::Index j = 0; j < queries.rows(); ++j) v.row(j) = fits[static_cast<std::size_t>(j)].w;
  return v;
}

BatchedObjective batched_objective(const Matrix& queries, const Matrix& dp, const Matrix& dq, const Matrix& w,
                                   const Eigen::VectorXd& b, DivergenceId field, double sigma, double clamp,
                                   Exec exec) {
  check_inputs(dp, dq, queries.cols(), "batched_objective");
  if (w.rows() != queries.rows() || w.cols() != queries.cols() || b.size() != queries.rows()) {
    throw ShapeError("batched_objective: W must be n_query x d and b must have n_query entries");
  }
  const DivergenceId mirror = mirror_of(field);
  const Interval dom = conj_domain(mirror);
  const Matrix kp = gauss_kernel(queries, dp, sigma, exec);
  const Matrix kq = gauss_kernel(queries, dq, sigma, exec);
  const double inv_np = 1.0 / static_cast<double>(dp.rows());
  const double inv_nq = 1.0 / static_cast<double>(dq.rows());

  BatchedObjective out{Eigen::VectorXd(queries.rows()), Matrix(queries.rows(), queries.cols()),
                       Eigen::VectorXd(queries.rows())};
  const Eigen::Index n = queries.rows();
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (Eigen::Index j = 0; j < n; ++j) {
    const Eigen::VectorXd dpv = (dp * w.row(j).transpose()).array() + b(j);
    const Eigen::VectorXd dqv = (dq * w.row(j).transpose()).array() + b(j);
    Eigen::RowVectorXd coef(dq.rows());
    double conj_sum = 0.0;
    for (Eigen::Index i = 0; i < dq.rows(); ++i) {
      const ConjugateValue c = guarded_conjugate(mirror, dom, clamp, dqv(i));
      conj_sum += kq(j, i) * c.value;
      coef(i) = kq(j, i) * c.prime;
    }
    out.value(j) = kp.row(j).dot(dpv) * inv_np - conj_sum * inv_nq;
    if (std::isinf(conj_sum)) out.value(j) = kNegInf;
    out.grad_w.row(j) = kp.row(j) * dp * inv_np - coef * dq * inv_nq;
    out.grad_b(j) = kp.row(j).sum() * inv_np - coef.sum() * inv_nq;
  }
  return out;
}

}  // namespace wgf
