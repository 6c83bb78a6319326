#pragma once

#include "wgf/core.hpp"
#include "wgf/score.hpp"

namespace wgf {

// Floor on the kernel-mass denominator E_q[k] below which a query has no
// local information.
inline constexpr double kDenominatorFloor = 1e-12;

// Kernel sums shared by the Nadaraya-Watson field and SVGD:
//   numerator(x*)   = sum_i k(x_i, x*) (score(x_i) + (x* - x_i) / sigma^2)
//   denominator(x*) = sum_i k(x_i, x*)
struct SteinSums {
  Matrix numerator;
  Eigen::VectorXd denominator;
};

[[nodiscard]] SteinSums stein_sums(const Matrix& particles, const Matrix& particle_scores,
                                   const Matrix& queries, double sigma, Exec exec = Exec::Parallel);

// Nadaraya-Watson estimate of the backward-KL field grad log(p/q) at each
// query, using particles ~ q and the closed-form target score. Throws
// DegenerateNeighborhood naming the first query whose kernel mass
// E_q[k] falls below kDenominatorFloor.
[[nodiscard]] Matrix nw_velocity(const Matrix& particles, const ScoreOracle& score_p,
                                 const Matrix& queries, double sigma, Exec exec = Exec::Parallel);

// Queries default to the particles themselves.
[[nodiscard]] Matrix nw_velocity(const Matrix& particles, const ScoreOracle& score_p, double sigma,
                                 Exec exec = Exec::Parallel);

}  // namespace wgf
