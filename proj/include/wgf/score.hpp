#pragma once

#include "wgf/core.hpp"

#include <functional>
#include <string>
#include <vector>

namespace wgf {

// Closed-form grad log p.
struct ScoreOracle {
  Eigen::Index dim = 1;
  std::function<Eigen::RowVectorXd(const Eigen::RowVectorXd&)> score;

  // Scores of every row of x, one row per sample.
  [[nodiscard]] Matrix evaluate(const Matrix& x) const;
};

// Isotropic Gaussian mixture. Every component shares the same dimension.
struct MixtureSpec {
  std::vector<double> weights;
  std::vector<Eigen::RowVectorXd> means;
  std::vector<double> sds;

  [[nodiscard]] Eigen::Index dim() const { return means.empty() ? 0 : means.front().size(); }
  void validate() const;
};

// Parses "w:mu:sd,w:mu:sd,..." (one-dimensional components); weights are
// normalized.
[[nodiscard]] MixtureSpec parse_mixture(const std::string& text);

[[nodiscard]] ScoreOracle gaussian_score(const Eigen::RowVectorXd& mean, double sd);
[[nodiscard]] ScoreOracle mixture_score(const MixtureSpec& spec);

// Log density of the mixture at every row of x.
[[nodiscard]] Eigen::VectorXd mixture_log_density(const MixtureSpec& spec, const Matrix& x);

}  // namespace wgf
