#include "wgf/score.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

namespace wgf {

Matrix ScoreOracle::evaluate(const Matrix& x) const {
  if (x.cols() != dim) throw ShapeError("score oracle: dimension mismatch");
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::RowVectorXd s = score(x.row(i));
    if (s.size() != dim) throw ShapeError("score oracle returned a vector of the wrong size");
    out.row(i) = s;
  }
  return out;
}

void MixtureSpec::validate() const {
  if (weights.empty() || weights.size() != means.size() || weights.size() != sds.size()) {
    throw UsageError("mixture: weights, means and sds must be non-empty and the same length");
  }
  double total = 0.0;
  for (std::size_t c = 0; c < weights.size(); ++c) {
    if (!(weights[c] > 0.0)) throw UsageError("mixture: weights must be positive");
    if (!(sds[c] > 0.0)) throw UsageError("mixture: standard deviations must be positive");
    if (means[c].size() != means.front().size()) throw UsageError("mixture: inconsistent component dimension");
    total += weights[c];
  }
  if (!std::isfinite(total)) throw UsageError("mixture: invalid weights");
}

MixtureSpec parse_mixture(const std::string& text) {
  MixtureSpec spec;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double w = 0, mu = 0, sd = 0;
    char c1 = 0, c2 = 0;
    std::stringstream is(item);
    if (!(is >> w >> c1 >> mu >> c2 >> sd) || c1 != ':' || c2 != ':') {
      throw UsageError("mixture: cannot parse component '" + item + "' (expected w:mu:sd)");
    }
    spec.weights.push_back(w);
    spec.means.push_back(Eigen::RowVectorXd::Constant(1, mu));
    spec.sds.push_back(sd);
  }
  spec.validate();
  double total = 0.0;
  for (double w : spec.weights) total += w;
  for (double& w : spec.weights) w /= total;
  return spec;
}

ScoreOracle gaussian_score(const Eigen::RowVectorXd& mean, double sd) {
  if (!(sd > 0.0)) throw UsageError("gaussian score: sd must be positive");
  const double inv_var = 1.0 / (sd * sd);
  return ScoreOracle{mean.size(), [mean, inv_var](const Eigen::RowVectorXd& x) -> Eigen::RowVectorXd {
                       return (mean - x) * inv_var;
                     }};
}

ScoreOracle mixture_score(const MixtureSpec& spec) {
  spec.validate();
  return ScoreOracle{spec.dim(), [spec](const Eigen::RowVectorXd& x) -> Eigen::RowVectorXd {
                       // Responsibility-weighted component scores, computed in log space.
                       const std::size_t k = spec.weights.size();
                       std::vector<double> logw(k);
                       double mx = -std::numeric_limits<double>::infinity();
                       const double dim = static_cast<double>(x.size());
                       for (std::size_t c = 0; c < k; ++c) {
                         const double var = spec.sds[c] * spec.sds[c];
                         logw[c] = std::log(spec.weights[c]) - 0.5 * dim * std::log(var) -
                                   0.5 * (x - spec.means[c]).squaredNorm() / var;
                         mx = std::max(mx, logw[c]);
                       }
                       double total = 0.0;
                       Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(x.size());
                       for (std::size_t c = 0; c < k; ++c) {
                         const double r = std::exp(logw[c] - mx);
                         total += r;
                         acc += r * (spec.means[c] - x) / (spec.sds[c] * spec.sds[c]);
                       }
                       return acc / total;
                     }};
}

Eigen::VectorXd mixture_log_density(const MixtureSpec& spec, const Matrix& x) {
  spec.validate();
  if (x.cols() != spec.dim()) throw ShapeError("mixture density: dimension mismatch");
  const double dim = static_cast<double>(x.cols());
  Eigen::VectorXd out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(spec.weights.size());
    for (std::size_t c = 0; c < spec.weights.size(); ++c) {
      const double var = spec.sds[c] * spec.sds[c];
      terms[c] = std::log(spec.weights[c]) - 0.5 * dim * std::log(2.0 * std::numbers::pi * var) -
                 0.5 * (x.row(i) - spec.means[c]).squaredNorm() / var;
      mx = std::max(mx, terms[c]);
    }
    double s = 0.0;
    for (double t : terms) s += std::exp(t - mx);
    out(i) = mx + std::log(s);
  }
  return out;
}

}  // namespace wgf
