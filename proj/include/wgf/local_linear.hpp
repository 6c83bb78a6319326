#pragma once

#include "wgf/core.hpp"
#include "wgf/divergence.hpp"

#include <optional>
#include <vector>

namespace wgf {

// Local-linear velocity field estimation.
//
// At a query x* the field of a divergence D_phi is grad (h o r)(x*). Let
// D_psi be the mirror of D_phi. Since h o r maximizes
// E_p[d] - E_q[psi_con(d)], fitting an affine d(x) = <w, x> + b to the
// kernel-localized objective
//
//   l(w, b; x*) = E_p[k(x, x*) d(x)] - E_q[k(x, x*) psi_con(d(x))]
//
// gives w(x*) as an estimate of grad (h o r)(x*).

enum class Optimizer {
  // Damped Newton ascent with backtracking line search.
  Newton,
  // Per-coordinate adaptive steps (Adam) on the mass-normalized objective.
  Adam,
};

struct FitOptions {
  double sigma = 1.0;
  int max_iters = 2000;
  double learning_rate = 0.05;
  // Bound on the norm of the gradient of l / E_q[k] at a converged solution.
  double tol = 1e-6;
  // Above this d the exponential conjugate continues as its second-order
  // Taylor expansion, which stays convex and cannot overflow.
  double clamp = 30.0;
  // Slope prior worth `slope_ridge` pseudo-observations: the objective
  // loses (slope_ridge / 2) * sigma^2 * |w|^2 * 2 / (n_p + n_q). A query on
  // the edge of the samples whose outermost neighbours all come from Dp has
  // no maximizer for the exponential, log and cubic conjugates (w grows
  // without bound); the prior keeps those fits finite and fades as n grows.
  // 0 disables it.
  double slope_ridge = 5.0;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::Newton;
  // Kernel weights below this are dropped from the per-query sums.
  double weight_floor = 1e-12;

  void validate() const;
};

struct LocalFit {
  Eigen::RowVectorXd w;
  double b = 0.0;
  // Fitted d at the query, computed without the cancellation in <w, x*> + b.
  double d_query = 0.0;
  Eigen::RowVectorXd query;
  bool converged = false;
  double objective_value = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;

  // Fitted d at x: <w, x> + b.
  [[nodiscard]] double predict(RowRef x) const { return w.dot(x) + b; }
};

// Kernel-weighted neighbours of one query in centred coordinates
// u = [x - x*, 1]. Weights already include the 1/n_p and 1/n_q factors.
struct Neighborhood {
  // Rows [x - query, 1] of the kept samples; column-major for the
  // column-wise products in the fits.
  Eigen::MatrixXd up;
  Eigen::MatrixXd uq;
  Eigen::VectorXd kp;
  Eigen::VectorXd kq;
  double mass_p = 0.0;  // E_p[k]
  double mass_q = 0.0;  // E_q[k]
};

[[nodiscard]] Neighborhood gather_neighborhood(RowRef query, const Matrix& dp, const Matrix& dq,
                                               double sigma, double weight_floor);

// The localized objective at one query (including the slope penalty),
// parameterized by theta = [w, b] in the original coordinates.
class LocalObjective {
 public:
  LocalObjective(RowRef query, const Matrix& dp, const Matrix& dq, DivergenceId field, const FitOptions& opts);

  [[nodiscard]] double value(const Eigen::VectorXd& theta) const;
  [[nodiscard]] Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  [[nodiscard]] Eigen::MatrixXd hessian(const Eigen::VectorXd& theta) const;

  [[nodiscard]] const Neighborhood& neighborhood() const { return nb_; }
  [[nodiscard]] DivergenceId mirror() const { return mirror_; }

  // Centred parameterization [w, b + <w, x*>] used by the solvers.
  [[nodiscard]] Eigen::VectorXd to_centered(const Eigen::VectorXd& theta) const;
  [[nodiscard]] Eigen::VectorXd from_centered(const Eigen::VectorXd& theta_c) const;
  [[nodiscard]] double value_centered(const Eigen::VectorXd& theta_c) const;
  [[nodiscard]] Eigen::VectorXd gradient_centered(const Eigen::VectorXd& theta_c) const;
  [[nodiscard]] Eigen::MatrixXd hessian_centered(const Eigen::VectorXd& theta_c) const;

  // Value, gradient and Hessian in one pass (centred coordinates). Returns
  // false when theta_c leaves the conjugate domain.
  bool evaluate_centered(const Eigen::VectorXd& theta_c, double& value, Eigen::VectorXd* gradient,
                         Eigen::MatrixXd* hessian) const;

 private:
  Eigen::RowVectorXd query_;
  DivergenceId mirror_;
  double clamp_;
  double penalty_;  // slope_ridge * sigma^2 * 2 / (n_p + n_q)
  Neighborhood nb_;
  Eigen::VectorXd grad_p_;  // sum_p k u, constant in theta
};

// Conjugate of the mirror of `field` as the estimator evaluates it: +inf
// outside the domain and the quadratic continuation of exp above `clamp`.
[[nodiscard]] ConjugateValue estimator_conjugate(DivergenceId field, double d, double clamp = 30.0);

// Starting intercept of a fit (w starts at 0): the best constant fit, i.e.
// the b with psi_con'(b) = ratio, where ratio = local p mass / local q mass.
// Falls back to 0 (or -1 when the mirror conjugate needs d < 0) when the
// ratio is not positive and finite.
[[nodiscard]] double initial_intercept(DivergenceId field, double ratio = 0.0);

// Per-iteration objective values, recorded when requested.
struct FitTrace {
  std::vector<double> objective;
};

// Maximizes the localized objective at one query.
[[nodiscard]] LocalFit fit_one(RowRef query, const Matrix& dp, const Matrix& dq, DivergenceId field,
                               const FitOptions& opts, FitTrace* trace = nullptr,
                               Eigen::Index query_index = 0);

// Independent fits at every query (OpenMP over queries).
[[nodiscard]] std::vector<LocalFit> fit_batch(const Matrix& queries, const Matrix& dp, const Matrix& dq,
                                              DivergenceId field, const FitOptions& opts,
                                              Exec exec = Exec::Parallel);

// Closed-form maximizer of the forward-KL-field objective (quadratic
// conjugate): E_q[k u u^T] theta = E_p[k u] - E_q[k u], with u = [x - x*, 1].
// The default ridge is 1e-9 * trace. `slope_ridge` adds the same slope
// penalty as FitOptions (off by default). Throws RankDeficient when the
// system is singular.
[[nodiscard]] LocalFit solve_quadratic(RowRef query, const Matrix& dp, const Matrix& dq, double sigma,
                                       std::optional<double> ridge = std::nullopt,
                                       double weight_floor = 1e-12, Eigen::Index query_index = 0,
                                       double slope_ridge = 0.0);

// Estimated velocity grad (h o r) at every query; rows align with queries.
// The forward-KL field uses the closed form, others the iterative fit.
[[nodiscard]] Matrix velocity_field(const Matrix& queries, const Matrix& dp, const Matrix& dq,
                                    DivergenceId field, const FitOptions& opts, Exec exec = Exec::Parallel);

// Fits (closed form when the conjugate is quadratic), rows align with queries.
[[nodiscard]] std::vector<LocalFit> fit_field(const Matrix& queries, const Matrix& dp, const Matrix& dq,
                                              DivergenceId field, const FitOptions& opts,
                                              Exec exec = Exec::Parallel);

// Vectorized objective over all queries at once, without neighbour
// truncation. For parameter rows W (n x d) and intercepts b (n):
//   grad_W = K_p X_p / n_p - (K_q o psi_con'(W X_q^T + b)) X_q / n_q
//   grad_b = K_p 1 / n_p  - (K_q o psi_con'(W X_q^T + b)) 1 / n_q
struct BatchedObjective {
  Eigen::VectorXd value;
  Matrix grad_w;
  Eigen::VectorXd grad_b;
};

[[nodiscard]] BatchedObjective batched_objective(const Matrix& queries, const Matrix& dp, const Matrix& dq,
                                                 const Matrix& w, const Eigen::VectorXd& b,
                                                 DivergenceId field, double sigma, double clamp = 30.0,
                                                 Exec exec = Exec::Parallel);

}  // namespace wgf
