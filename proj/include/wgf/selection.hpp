#pragma once

#include "wgf/core.hpp"
#include "wgf/divergence.hpp"
#include "wgf/local_linear.hpp"

#include <string>
#include <vector>

namespace wgf {

// How a flow or estimator picks its kernel bandwidth.
struct SigmaPolicy {
  enum class Kind { Fixed, Median, CV };
  Kind kind = Kind::Median;
  double value = 1.0;  // used by Fixed
  int folds = 5;       // used by CV

  static SigmaPolicy fixed(double sigma) { return {Kind::Fixed, sigma, 5}; }
  static SigmaPolicy median() { return {Kind::Median, 1.0, 5}; }
  static SigmaPolicy cv(int folds = 5) { return {Kind::CV, 1.0, folds}; }

  // "median", "cv" or a positive number.
  static SigmaPolicy parse(const std::string& text);
  [[nodiscard]] std::string to_string() const;
};

struct SelectionReport {
  std::vector<double> candidates;
  // Held-out criterion per candidate; -inf marks a candidate whose fits failed.
  std::vector<double> criterion;
  double chosen = 0.0;
  int folds = 0;
};

// {1/8, 1/4, 1/2, 1, 2} x median bandwidth of Dp and Dq pooled.
[[nodiscard]] std::vector<double> default_candidates(const Matrix& dp, const Matrix& dq);

// Held-out variational criterion for one bandwidth. Every sample is held out
// once; the local-linear interpolant fitted on the remaining folds is
// evaluated at it, and the criterion is mean_p d - mean_q psi_con(d) over the
// held-out points. Held-out points without training q mass in kernel reach
// are skipped. Returns -inf when every held-out p or q point is skipped, a
// fit fails, or d leaves the conjugate domain.
[[nodiscard]] double heldout_criterion(const Matrix& dp, const Matrix& dq, DivergenceId field, double sigma,
                                       int folds, std::uint64_t seed, const FitOptions& base = {},
                                       Exec exec = Exec::Parallel);

// K-fold bandwidth selection. Ties go to the smaller bandwidth.
[[nodiscard]] SelectionReport select_bandwidth(const Matrix& dp, const Matrix& dq, DivergenceId field,
                                               const std::vector<double>& candidates, int folds,
                                               std::uint64_t seed, const FitOptions& base = {},
                                               Exec exec = Exec::Parallel);

// Resolves a policy to a concrete bandwidth for the pair (Dp, Dq).
[[nodiscard]] double resolve_sigma(const SigmaPolicy& policy, const Matrix& dp, const Matrix& dq,
                                   DivergenceId field, std::uint64_t seed, const FitOptions& base = {},
                                   Exec exec = Exec::Parallel);

// Held-out lower-bound estimate of D_which[p, q], using the field whose
// mirror is `which`. For which = ForwardKL this is KL[p, q].
[[nodiscard]] double divergence_estimate(const Matrix& dp, const Matrix& dq, DivergenceId which,
                                         const SigmaPolicy& policy, std::uint64_t seed,
                                         const FitOptions& base = {}, Exec exec = Exec::Parallel);

// Fold id (0..folds-1) per row from a seeded shuffle; fold sizes differ by at most one.
[[nodiscard]] std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed);

}  // namespace wgf
