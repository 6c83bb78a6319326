#include "wgf/flow.hpp"

#include "wgf/kernel.hpp"
#include "wgf/nw_field.hpp"
#include "wgf/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace wgf {

namespace {

bool sigma_due(const SigmaPolicy& policy, int t, int cv_every) {
  switch (policy.kind) {
    case SigmaPolicy::Kind::Fixed: return t == 0;
    case SigmaPolicy::Kind::Median: return true;
    case SigmaPolicy::Kind::CV: return t % cv_every == 0;
  }
  return true;
}

Matrix one_hot(const std::vector<int>& labels, int classes, double scale) {
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) out(static_cast<Eigen::Index>(i), labels[i]) = scale;
  return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

FlowState step(FlowState state, const Matrix& field) {
  if (field.rows() != state.particles.rows() || field.cols() != state.particles.cols()) {
    throw ShapeError("step: field shape does not match particles");
  }
  const bool masked = state.mask.has_value();
  if (masked && (state.mask->rows() != field.rows() || state.mask->cols() != field.cols())) {
    throw ShapeError("step: mask shape does not match particles");
  }
  for (Eigen::Index i = 0; i < field.rows(); ++i) {
    for (Eigen::Index c = 0; c < field.cols(); ++c) {
      if (masked && (*state.mask)(i, c) != 0) continue;
      if (!std::isfinite(field(i, c))) {
        throw DomainError("step: non-finite field at particle " + std::to_string(i) + ", coordinate " +
                          std::to_string(c));
      }
      state.particles(i, c) += state.eta * field(i, c);
    }
  }
  ++state.t;
  return state;
}

FieldMethod parse_method(const std::string& name) {
  if (name == "ll") return FieldMethod::LocalLinear;
  if (name == "nw") return FieldMethod::NadarayaWatson;
  throw UsageError("unknown method '" + name + "' (expected ll or nw)");
}

void FlowOptions::validate(Eigen::Index dim) const {
  if (iters < 1) throw UsageError("iters must be at least 1");
  if (!(eta > 0.0) || !std::isfinite(eta)) throw UsageError("eta must be positive");
  if (cv_every < 1) throw UsageError("cv_every must be at least 1");
  if (snapshot_every < 0) throw UsageError("snapshot_every must be nonnegative");
  if (!is_field_divergence(field)) throw UsageError("flow needs one of fkl, bkl, pearson, neyman");
  if (method == FieldMethod::NadarayaWatson) {
    if (field != DivergenceId::BackwardKL) throw UsageError("the nw method estimates the bkl field only");
    if (!score) throw UsageError("the nw method needs a target score");
    if (score->dim != dim) throw ShapeError("score dimension does not match the data");
    if (subspace_dim > 0) throw UsageError("feature-space flow uses the ll method");
  }
  if (subspace_dim < 0 || subspace_dim > dim) {
    throw UsageError("subspace dimension must lie in [1, " + std::to_string(dim) + "]");
  }
  if (subspace_every < 1) throw UsageError("subspace_every must be at least 1");
  fit.validate();
}

double flow_monitor(const Matrix& particles, const Matrix& target, const SigmaPolicy& policy, std::uint64_t seed,
                    const FitOptions& base, Exec exec) {
  return divergence_estimate(particles, target, DivergenceId::ForwardKL, policy, seed, base, exec);
}

Matrix estimate_field(const Matrix& dp, const Matrix& particles, const FlowOptions& opts, double sigma) {
  if (opts.method == FieldMethod::NadarayaWatson) return nw_velocity(particles, *opts.score, particles, sigma, opts.exec);
  FitOptions fit = opts.fit;
  fit.sigma = sigma;
  return velocity_field(particles, dp, particles, opts.field, fit, opts.exec);
}

FlowState run_flow(const Matrix& dp, const Matrix& q0, const FlowOptions& opts, FeatureMap* last_map) {
  require_nonempty(dp, "run_flow");
  require_nonempty(q0, "run_flow");
  require_same_dim(dp, q0, "run_flow");
  opts.validate(dp.cols());

  FlowState state;
  state.particles = q0;
  state.eta = opts.eta;
  const std::uint64_t monitor_seed = derive_seed(opts.seed, stream::kMonitor);
  const bool feature_space = opts.subspace_dim > 0;
  std::optional<FeatureMap> map;
  double sigma = 0.0;
  int increases = 0;

  // Median bandwidth of the current particles and dp, shared by the monitor
  // and the next field estimate (same union of points).
  std::optional<double> state_median;
  auto current_median = [&]() {
    if (!state_median) state_median = median_bandwidth(state.particles, dp);
    return *state_median;
  };

  auto record = [&](double used_sigma) {
    if (!opts.monitor) return;
    const SigmaPolicy policy = opts.monitor_sigma.kind == SigmaPolicy::Kind::Median
                                   ? SigmaPolicy::fixed(current_median())
                                   : opts.monitor_sigma;
    const double v = flow_monitor(state.particles, dp, policy, monitor_seed, opts.fit, opts.exec);
    if (!state.history.empty() && v > state.history.back().value) {
      if (++increases == opts.warn_after) {
        state.warnings.push_back("monitor increased for " + std::to_string(opts.warn_after) +
                                 " consecutive iterations (t=" + std::to_string(state.t) + ")");
      }
    } else {
      increases = 0;
    }
    state.history.push_back({state.t, v, used_sigma});
  };

  if (opts.snapshot_every > 0) state.trajectory.push_back({0, state.particles});
  record(0.0);
  for (int it = 0; it < opts.iters; ++it) {
    const Matrix& particles = state.particles;
    if (feature_space && it % opts.subspace_every == 0) {
      SubspaceOptions sub = opts.subspace;
      sub.exec = opts.exec;
      sub.seed = derive_seed(opts.seed, stream::kSubspace);
      FeatureMap start = map ? *map : initial_feature_map(dp, particles, opts.subspace_dim, sub);
      sub.fit.sigma = median_bandwidth(start.project(dp), start.project(particles));
      map = search_feature_map(dp, particles, opts.subspace_dim, opts.field, sub, nullptr, &start);
    }
    if (sigma_due(opts.sigma, it, opts.cv_every) || (feature_space && it % opts.subspace_every == 0)) {
      const std::uint64_t s = derive_seed(opts.seed, static_cast<std::uint64_t>(it));
      sigma = feature_space ? resolve_sigma(opts.sigma, map->project(dp), map->project(particles), opts.field, s,
                                            opts.fit, opts.exec)
                  : opts.sigma.kind == SigmaPolicy::Kind::Median
                            ? current_median()
                            : resolve_sigma(opts.sigma, dp, particles, opts.field, s, opts.fit, opts.exec);
    }
    Matrix field;
    if (feature_space) {
      FitOptions fit = opts.fit;
      fit.sigma = sigma;
      field = feature_velocity_field(*map, particles, dp, particles, opts.field, fit, opts.exec);
    } else {
      field = estimate_field(dp, particles, opts, sigma);
    }
    state = step(std::move(state), field);
    state_median.reset();
    if (opts.snapshot_every > 0 && state.t % opts.snapshot_every == 0) {
      state.trajectory.push_back({state.t, state.particles});
    }
    record(sigma);
  }
  if (last_map != nullptr && map) *last_map = *map;
  return state;
}

Matrix impute_column_mean(const Matrix& x, const Mask& mask) {
  const ColumnStats s = observed_stats(x, mask);
  Matrix out = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (mask(i, c) == 0) out(i, c) = s.mean(c);
    }
  }
  return out;
}

ImputeResult impute(const Matrix& x, const Mask& mask, const ImputeOptions& opts) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ShapeError("impute: mask shape does not match data");
  if (opts.iters < 1) throw UsageError("iters must be at least 1");
  if (!(opts.eta > 0.0)) throw UsageError("eta must be positive");
  if (opts.cv_every < 1) throw UsageError("cv_every must be at least 1");
  if (!(opts.mask_scale > 0.0)) throw UsageError("mask_scale must be positive");
  if (!is_field_divergence(opts.field)) throw UsageError("impute needs one of fkl, bkl, pearson, neyman");
  ImputeResult result;
  result.imputed = x;
  std::vector<Eigen::Index> free_rows;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if ((mask.row(i).array() == 0).any()) free_rows.push_back(i);
  }
  if (free_rows.empty()) return result;
  auto [z, stats] = standardize(x, mask);

  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  std::mt19937_64 init_rng(derive_seed(opts.seed, stream::kImputeInit));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) {
      if (mask(i, c) == 0) z(i, c) = normal(init_rng);
    }
  }
  const Matrix m = mask.cast<double>() * opts.mask_scale;
  const auto nfree = static_cast<Eigen::Index>(free_rows.size());
  const std::uint64_t perm_seed = derive_seed(opts.seed, stream::kImputePermute);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  double sigma = 0.0;

  for (int t = 0; t < opts.iters; ++t) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(derive_seed(perm_seed, static_cast<std::uint64_t>(t)));
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix joint(n, 2 * d);
    Matrix product(n, 2 * d);
    joint << z, m;
    for (Eigen::Index i = 0; i < n; ++i) {
      product.row(i).head(d) = z.row(i);
      product.row(i).tail(d) = m.row(perm[static_cast<std::size_t>(i)]);
    }
    if (sigma_due(opts.sigma, t, opts.cv_every)) {
      sigma = resolve_sigma(opts.sigma, product, joint, opts.field, derive_seed(derive_seed(opts.seed, stream::kFolds), static_cast<std::uint64_t>(t)), opts.fit,
                            opts.exec);
    }
    Matrix queries(nfree, 2 * d);
    for (Eigen::Index r = 0; r < nfree; ++r) queries.row(r) = joint.row(free_rows[static_cast<std::size_t>(r)]);
    FitOptions fit = opts.fit;
    fit.sigma = sigma;
    const Matrix v = velocity_field(queries, product, joint, opts.field, fit, opts.exec);
    double moved = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index r = 0; r < nfree; ++r) {
      const Eigen::Index i = free_rows[static_cast<std::size_t>(r)];
      for (Eigen::Index c = 0; c < d; ++c) {
        if (mask(i, c) != 0) continue;
        if (!std::isfinite(v(r, c))) throw DomainError("impute: non-finite field at row " + std::to_string(i));
        z(i, c) += opts.eta * v(r, c);
        moved += std::abs(opts.eta * v(r, c));
        ++count;
      }
    }
    result.records.push_back({t + 1, sigma, moved / static_cast<double>(count)});
  }
  const Matrix back = destandardize(z, stats);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < d; ++c) {
      if (mask(i, c) == 0) result.imputed(i, c) = back(i, c);
    }
  }
  return result;
}

std::vector<int> nearest_neighbor_labels(const LabeledSet& train, const Matrix& queries) {
  require_nonempty(train.x, "nearest neighbour");
  require_same_dim(train.x, queries, "nearest neighbour");
  if (static_cast<Eigen::Index>(train.labels.size()) != train.x.rows()) {
    throw ShapeError("nearest neighbour: one label per training row required");
  }
  std::vector<int> out(static_cast<std::size_t>(queries.rows()));
  for (Eigen::Index j = 0; j < queries.rows(); ++j) {
    Eigen::Index best = 0;
    (train.x.rowwise() - queries.row(j)).rowwise().squaredNorm().minCoeff(&best);
    out[static_cast<std::size_t>(j)] = train.labels[static_cast<std::size_t>(best)];
  }
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ShapeError("accuracy: label vectors differ in length");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

AdaptResult adapt(const LabeledSet& source, const Matrix& target, const AdaptOptions& opts,
                  const std::vector<int>* target_labels) {
  require_nonempty(source.x, "adapt");
  require_nonempty(target, "adapt");
  require_same_dim(source.x, target, "adapt");
  if (static_cast<Eigen::Index>(source.labels.size()) != source.x.rows()) {
    throw ShapeError("adapt: one label per source row required");
  }
  if (opts.iters < 1) throw UsageError("iters must be at least 1");
  if (!(opts.eta > 0.0)) throw UsageError("eta must be positive");
  if (!(opts.label_scale >= 0.0)) throw UsageError("label_scale must be nonnegative");
  const auto [lo, hi] = std::minmax_element(source.labels.begin(), source.labels.end());
  if (*lo < 0) throw UsageError("adapt: labels must be integers 0..K-1");
  const int classes = *hi + 1;
  if (*lo == *hi) throw UsageError("adapt: the source has a single class");
  if (target_labels != nullptr) {
    if (static_cast<Eigen::Index>(target_labels->size()) != target.rows()) {
      throw ShapeError("adapt: one label per target row required");
    }
    for (int y : *target_labels) {
      if (y < 0 || y >= classes) throw UsageError("adapt: target labels outside the source classes 0..K-1");
    }
  }

  const Eigen::Index d = source.x.cols();
  AdaptResult result;
  if (target_labels != nullptr) {
    result.accuracy_before = accuracy(nearest_neighbor_labels(source, target), *target_labels);
  }
  FlowState state;
  state.eta = opts.eta;
  state.particles = hstack(source.x, one_hot(source.labels, classes, opts.label_scale));
  Mask frozen = Mask::Zero(state.particles.rows(), state.particles.cols());
  frozen.rightCols(classes).setOnes();
  state.mask = frozen;
  double sigma = 0.0;

  for (int t = 0; t < opts.iters; ++t) {
    const LabeledSet current{state.particles.leftCols(d), source.labels};
    const std::vector<int> proxy = nearest_neighbor_labels(current, target);
    const Matrix target_joint = hstack(target, one_hot(proxy, classes, opts.label_scale));
    if (sigma_due(opts.sigma, t, 10)) {
      sigma = resolve_sigma(opts.sigma, target_joint, state.particles, DivergenceId::BackwardKL,
                            derive_seed(opts.seed, static_cast<std::uint64_t>(t)), opts.fit, opts.exec);
    }
    FitOptions fit = opts.fit;
    fit.sigma = sigma;
    const Matrix v = velocity_field(state.particles, target_joint, state.particles, DivergenceId::BackwardKL, fit,
                                    opts.exec);
    state = step(std::move(state), v);
    AdaptRecord rec{state.t, sigma, -1.0};
    if (target_labels != nullptr) {
      rec.accuracy = accuracy(nearest_neighbor_labels({state.particles.leftCols(d), source.labels}, target),
                              *target_labels);
    }
    result.records.push_back(rec);
  }
  result.transported = LabeledSet{state.particles.leftCols(d), source.labels};
  if (target_labels != nullptr) result.accuracy_after = result.records.back().accuracy;
  return result;
}

}  // namespace wgf
