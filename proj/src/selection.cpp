#include "wgf/selection.hpp"

#include "wgf/kernel.hpp"
#include "wgf/nw_field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

namespace wgf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Matrix take_rows(const Matrix& x, const std::vector<int>& fold, int k, bool in_fold) {
  Eigen::Index count = 0;
  for (int f : fold) count += (f == k) == in_fold ? 1 : 0;
  Matrix out(count, x.cols());
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if ((fold[static_cast<std::size_t>(i)] == k) == in_fold) out.row(r++) = x.row(i);
  }
  return out;
}

bool within_reach(RowRef x, const Matrix& dq, double sigma, double weight_floor) {
  const double inv_2s2 = 1.0 / (2.0 * sigma * sigma);
  const Eigen::ArrayXd w = ((dq.rowwise() - x).rowwise().squaredNorm().array() * -inv_2s2).exp();
  const double mass = (w >= weight_floor).select(w, 0.0).sum() / static_cast<double>(dq.rows());
  return mass >= kDenominatorFloor;
}

}  // namespace

SigmaPolicy SigmaPolicy::parse(const std::string& text) {
  if (text == "median") return median();
  if (text == "cv") return cv();
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || !(v > 0.0) || !std::isfinite(v)) {
    throw UsageError("--sigma expects a positive number, 'median' or 'cv', got '" + text + "'");
  }
  return fixed(v);
}

std::string SigmaPolicy::to_string() const {
  switch (kind) {
    case Kind::Median: return "median";
    case Kind::CV: return "cv";
    case Kind::Fixed: break;
  }
  std::ostringstream os;
  os.precision(17);
  os << value;
  return os.str();
}

std::vector<int> fold_assignment(Eigen::Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw UsageError("folds must be at least 2");
  if (n < folds) throw UsageError("need at least as many samples as folds (" + std::to_string(n) + " < " +
                                  std::to_string(folds) + ")");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> fold(static_cast<std::size_t>(n));
  for (std::size_t r = 0; r < order.size(); ++r) {
    fold[static_cast<std::size_t>(order[r])] = static_cast<int>(r % static_cast<std::size_t>(folds));
  }
  return fold;
}

std::vector<double> default_candidates(const Matrix& dp, const Matrix& dq) {
  const double m = median_bandwidth(dp, dq);
  return {m / 8.0, m / 4.0, m / 2.0, m, 2.0 * m};
}

double heldout_criterion(const Matrix& dp, const Matrix& dq, DivergenceId field, double sigma, int folds,
                         std::uint64_t seed, const FitOptions& base, Exec exec) {
  require_nonempty(dp, "heldout_criterion");
  require_nonempty(dq, "heldout_criterion");
  require_same_dim(dp, dq, "heldout_criterion");
  const std::uint64_t fold_seed = derive_seed(seed, stream::kFolds);
  const std::vector<int> fold_p = fold_assignment(dp.rows(), folds, derive_seed(fold_seed, 0));
  const std::vector<int> fold_q = fold_assignment(dq.rows(), folds, derive_seed(fold_seed, 1));
  FitOptions opts = base;
  opts.sigma = sigma;
  double sum_p = 0.0;
  double sum_q = 0.0;
  Eigen::Index used_p = 0;
  Eigen::Index used_q = 0;
  for (int k = 0; k < folds; ++k) {
    const Matrix train_p = take_rows(dp, fold_p, k, false);
    const Matrix train_q = take_rows(dq, fold_q, k, false);
    const Matrix test_p = take_rows(dp, fold_p, k, true);
    const Matrix test_q = take_rows(dq, fold_q, k, true);
    // Held-out points with no training q mass in reach carry no local
    // information; they are left out of the averages.
    std::vector<Eigen::Index> keep;
    Eigen::Index kept_p = 0;
    for (Eigen::Index j = 0; j < test_p.rows() + test_q.rows(); ++j) {
      const auto row = j < test_p.rows() ? test_p.row(j) : test_q.row(j - test_p.rows());
      if (within_reach(row, train_q, sigma, opts.weight_floor)) {
        keep.push_back(j);
        kept_p += j < test_p.rows() ? 1 : 0;
      }
    }
    if (keep.empty()) continue;
    Matrix queries(static_cast<Eigen::Index>(keep.size()), dp.cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
      const Eigen::Index j = keep[r];
      queries.row(static_cast<Eigen::Index>(r)) = j < test_p.rows() ? test_p.row(j) : test_q.row(j - test_p.rows());
    }
    std::vector<LocalFit> fits;
    try {
      fits = fit_field(queries, train_p, train_q, field, opts, exec);
    } catch (const DegenerateNeighborhood&) {
      return kNegInf;
    } catch (const OptimizerDivergence&) {
      return kNegInf;
    } catch (const RankDeficient&) {
      return kNegInf;
    }
    for (Eigen::Index r = 0; r < queries.rows(); ++r) {
      const double d = fits[static_cast<std::size_t>(r)].d_query;
      if (r < kept_p) {
        sum_p += d;
      } else {
        const double c = estimator_conjugate(field, d, opts.clamp).value;
        if (std::isinf(c)) return kNegInf;
        sum_q += c;
      }
    }
    used_p += kept_p;
    used_q += queries.rows() - kept_p;
  }
  if (used_p == 0 || used_q == 0) return kNegInf;
  const double value = sum_p / static_cast<double>(used_p) - sum_q / static_cast<double>(used_q);
  return std::isfinite(value) ? value : kNegInf;
}

SelectionReport select_bandwidth(const Matrix& dp, const Matrix& dq, DivergenceId field,
                                 const std::vector<double>& candidates, int folds, std::uint64_t seed,
                                 const FitOptions& base, Exec exec) {
  if (candidates.empty()) throw UsageError("select_bandwidth: no candidate bandwidths");
  if (folds < 2) throw UsageError("select_bandwidth: folds must be at least 2");
  for (double s : candidates) {
    if (!(s > 0.0) || !std::isfinite(s)) throw UsageError("select_bandwidth: candidates must be positive");
  }
  SelectionReport report;
  report.candidates = candidates;
  report.folds = folds;
  report.criterion.reserve(candidates.size());
  for (double s : candidates) report.criterion.push_back(heldout_criterion(dp, dq, field, s, folds, seed, base, exec));

  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double ci = report.criterion[i];
    const double cb = report.criterion[best];
    if (ci > cb || (ci == cb && candidates[i] < candidates[best])) best = i;
  }
  report.chosen = candidates[best];
  return report;
}

double resolve_sigma(const SigmaPolicy& policy, const Matrix& dp, const Matrix& dq, DivergenceId field,
                     std::uint64_t seed, const FitOptions& base, Exec exec) {
  switch (policy.kind) {
    case SigmaPolicy::Kind::Fixed:
      require_positive_sigma(policy.value);
      return policy.value;
    case SigmaPolicy::Kind::Median: return median_bandwidth(dp, dq);
    case SigmaPolicy::Kind::CV:
      return select_bandwidth(dp, dq, field, default_candidates(dp, dq), policy.folds, seed, base, exec).chosen;
  }
  return policy.value;
}

double divergence_estimate(const Matrix& dp, const Matrix& dq, DivergenceId which, const SigmaPolicy& policy,
                           std::uint64_t seed, const FitOptions& base, Exec exec) {
  require_nonempty(dp, "divergence_estimate");
  require_nonempty(dq, "divergence_estimate");
  require_same_dim(dp, dq, "divergence_estimate");
  const DivergenceId field = field_for_mirror(which);
  const double sigma = resolve_sigma(policy, dp, dq, field, seed, base, exec);
  const int folds = policy.kind == SigmaPolicy::Kind::CV ? policy.folds : 5;
  return heldout_criterion(dp, dq, field, sigma, folds, seed, base, exec);
}

}  // namespace wgf
