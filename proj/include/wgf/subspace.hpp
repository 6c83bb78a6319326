#pragma once

#include "wgf/core.hpp"
#include "wgf/divergence.hpp"
#include "wgf/local_linear.hpp"

#include <vector>

namespace wgf {

// Linear feature map s(x) = S^T (x - centre) with orthonormal columns.
struct FeatureMap {
  Matrix s;  // d x m
  Eigen::RowVectorXd centre;

  [[nodiscard]] Eigen::Index input_dim() const { return s.rows(); }
  [[nodiscard]] Eigen::Index m() const { return s.cols(); }
  // Rows of x mapped to feature space.
  [[nodiscard]] Matrix project(const Matrix& x) const;
  // |S^T S - I|_F.
  [[nodiscard]] double orthonormality_error() const;
};

struct SubspaceOptions {
  int outer_iters = 20;
  // Step size of the ascent pass on S.
  double learning_rate = 0.1;
  // Stop once the relative change of the plug-in objective falls below this.
  double stall_tol = 1e-4;
  FitOptions fit;
  // Evaluate the per-point fits on at most this many points of each sample
  // (evenly strided); 0 uses every point.
  Eigen::Index max_fit_points = 0;
  // Eigen directions whose |eigenvalue| is below this fraction of the
  // largest one, or below init_null_margin times the largest |eigenvalue|
  // found over init_null_draws random relabellings of the pooled rows,
  // count as weak. The relabelled statistic understates the noise when the
  // two samples differ in higher moments, hence the margin.
  double init_eig_ratio = 0.1;
  int init_null_draws = 5;
  double init_null_margin = 2.0;
  // Fill weak initial columns from the outer product of full-space field
  // estimates (median bandwidth); otherwise, or when that is weak too, draw
  // random orthonormal directions.
  bool init_gradients = true;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

// Initial S: leading |eigenvalue| directions of the difference of the
// centred second-moment matrices of Dp and Dq; weak directions are replaced
// as described at SubspaceOptions::init_gradients.
[[nodiscard]] FeatureMap initial_feature_map(const Matrix& dp, const Matrix& dq, Eigen::Index m,
                                             const SubspaceOptions& opts);

// Alternates local-linear fits in feature space, one ascent pass on S of the
// plug-in objective E_p[d(s(x))] - E_q[psi_con(d(s(x)))], and QR
// re-orthonormalization. `objective` receives the objective after each outer
// iteration's fits when non-null.
[[nodiscard]] FeatureMap search_feature_map(const Matrix& dp, const Matrix& dq, Eigen::Index m, DivergenceId field,
                                            const SubspaceOptions& opts, std::vector<double>* objective = nullptr,
                                            const FeatureMap* init = nullptr);

// Chain rule: grad (h o r)(x) = S grad (h o r_low)(S^T x).
[[nodiscard]] Eigen::VectorXd lifted_velocity(const FeatureMap& map, const Eigen::VectorXd& w_low);
// Row-wise version for many queries (n x m -> n x d).
[[nodiscard]] Matrix lifted_velocity(const FeatureMap& map, const Matrix& w_low);

// Local-linear field fitted in feature space and lifted back.
[[nodiscard]] Matrix feature_velocity_field(const FeatureMap& map, const Matrix& queries, const Matrix& dp,
                                            const Matrix& dq, DivergenceId field, const FitOptions& opts,
                                            Exec exec = Exec::Parallel);

// Largest principal angle (radians) between the column spaces of a and b.
[[nodiscard]] double max_principal_angle(const Matrix& a, const Matrix& b);

}  // namespace wgf
