#pragma once

#include "wgf/core.hpp"
#include "wgf/score.hpp"

namespace wgf {

// SVGD direction with a Gaussian RBF kernel, one row per particle:
// (1/n) sum_i [k(x_i, x*) score(x_i) + k(x_i, x*) (x* - x_i) / sigma^2].
[[nodiscard]] Matrix svgd_update(const Matrix& particles, const ScoreOracle& score_p, double sigma,
                                 Exec exec = Exec::Parallel);

// KDE score: grad log p_hat(y) = sum_i grad_y k(x_i, y) / sum_i k(x_i, y).
// The normalizing constant of the KDE cancels.
[[nodiscard]] Matrix kde_score(const Matrix& samples, const Matrix& queries, double sigma,
                               Exec exec = Exec::Parallel);

// KDE baseline for grad log(p/q): kde_score(Dp) - kde_score(Dq).
[[nodiscard]] Matrix kde_ratio_gradient(const Matrix& dp, const Matrix& dq, const Matrix& queries,
                                        double sigma, Exec exec = Exec::Parallel);

}  // namespace wgf
