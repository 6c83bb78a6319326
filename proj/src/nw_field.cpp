#include "wgf/nw_field.hpp"

#include "wgf/kernel.hpp"

#include <cmath>
#include <string>

namespace wgf {

SteinSums stein_sums(const Matrix& particles, const Matrix& particle_scores, const Matrix& queries,
                     double sigma, Exec exec) {
  require_positive_sigma(sigma);
  require_same_dim(particles, queries, "stein_sums");
  require_same_dim(particles, particle_scores, "stein_sums");
  if (particle_scores.rows() != particles.rows()) throw ShapeError("stein_sums: one score row per particle required");

  const Matrix k = gauss_kernel(queries, particles, sigma, exec);
  const double inv_s2 = 1.0 / (sigma * sigma);
  SteinSums out{Matrix(queries.rows(), queries.cols()), Eigen::VectorXd(queries.rows())};
  const Eigen::Index nq = queries.rows();
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (Eigen::Index j = 0; j < nq; ++j) {
    const double mass = k.row(j).sum();
    // sum_i k_i (s_i + (x* - x_i)/sigma^2) = K S + (mass x* - K X)/sigma^2
    out.numerator.row(j) = k.row(j) * particle_scores +
                           (mass * queries.row(j) - k.row(j) * particles) * inv_s2;
    out.denominator(j) = mass;
  }
  return out;
}

Matrix nw_velocity(const Matrix& particles, const ScoreOracle& score_p, const Matrix& queries,
                   double sigma, Exec exec) {
  require_nonempty(particles, "nw_velocity");
  const SteinSums sums = stein_sums(particles, score_p.evaluate(particles), queries, sigma, exec);
  const double n = static_cast<double>(particles.rows());
  Matrix out(queries.rows(), queries.cols());
  for (Eigen::Index j = 0; j < queries.rows(); ++j) {
    if (!(sums.denominator(j) / n >= kDenominatorFloor)) {
      throw DegenerateNeighborhood(j, "nw_velocity: query " + std::to_string(j) +
                                          " has no particles within kernel reach (E_q[k] below floor)");
    }
    out.row(j) = sums.numerator.row(j) / sums.denominator(j);
  }
  return out;
}

Matrix nw_velocity(const Matrix& particles, const ScoreOracle& score_p, double sigma, Exec exec) {
  return nw_velocity(particles, score_p, particles, sigma, exec);
}

}  // namespace wgf
