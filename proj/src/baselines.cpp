#include "wgf/baselines.hpp"

#include "wgf/kernel.hpp"
#include "wgf/nw_field.hpp"

#include <string>

namespace wgf {

Matrix svgd_update(const Matrix& particles, const ScoreOracle& score_p, double sigma, Exec exec) {
  require_nonempty(particles, "svgd_update");
  const SteinSums sums = stein_sums(particles, score_p.evaluate(particles), particles, sigma, exec);
  return sums.numerator / static_cast<double>(particles.rows());
}

Matrix kde_score(const Matrix& samples, const Matrix& queries, double sigma, Exec exec) {
  require_nonempty(samples, "kde_score");
  // With a zero score the Stein numerator is sum_i grad_{x_i} k(x_i, y),
  // which is minus sum_i grad_y k(x_i, y).
  const Matrix zero = Matrix::Zero(samples.rows(), samples.cols());
  const SteinSums sums = stein_sums(samples, zero, queries, sigma, exec);
  const double n = static_cast<double>(samples.rows());
  Matrix out(queries.rows(), queries.cols());
  for (Eigen::Index j = 0; j < queries.rows(); ++j) {
    if (!(sums.denominator(j) / n >= kDenominatorFloor)) {
      throw DegenerateNeighborhood(j, "kde_score: query " + std::to_string(j) + " is outside kernel reach");
    }
    out.row(j) = -sums.numerator.row(j) / sums.denominator(j);
  }
  return out;
}

Matrix kde_ratio_gradient(const Matrix& dp, const Matrix& dq, const Matrix& queries, double sigma,
                          Exec exec) {
  return kde_score(dp, queries, sigma, exec) - kde_score(dq, queries, sigma, exec);
}

}  // namespace wgf
