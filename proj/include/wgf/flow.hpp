#pragma once

#include "wgf/core.hpp"
#include "wgf/divergence.hpp"
#include "wgf/local_linear.hpp"
#include "wgf/score.hpp"
#include "wgf/selection.hpp"
#include "wgf/subspace.hpp"

#include <optional>
#include <string>
#include <vector>

namespace wgf {

struct MonitorRecord {
  int t = 0;
  double value = 0.0;
  double sigma = 0.0;  // bandwidth used by the field at this iteration
};

struct Snapshot {
  int t = 0;
  Matrix particles;
};

struct FlowState {
  Matrix particles;
  int t = 0;
  double eta = 0.1;
  // 1 = observed (frozen), 0 = free.
  std::optional<Mask> mask;
  std::vector<MonitorRecord> history;
  std::vector<Snapshot> trajectory;
  std::vector<std::string> warnings;
};

// One Euler step: particles += eta * field on free entries; t += 1.
// Throws UsageError on shape mismatch and DomainError on non-finite field
// entries.
[[nodiscard]] FlowState step(FlowState state, const Matrix& field);

enum class FieldMethod { LocalLinear, NadarayaWatson };
[[nodiscard]] FieldMethod parse_method(const std::string& name);

struct FlowOptions {
  DivergenceId field = DivergenceId::BackwardKL;
  FieldMethod method = FieldMethod::LocalLinear;
  int iters = 20;
  double eta = 0.1;
  SigmaPolicy sigma = SigmaPolicy::median();
  // CV bandwidths are refreshed every this many iterations.
  int cv_every = 10;
  bool monitor = true;
  // Record KL[q_t, p] estimates with this bandwidth policy.
  SigmaPolicy monitor_sigma = SigmaPolicy::median();
  int snapshot_every = 0;
  // Consecutive monitor increases that trigger a warning record.
  int warn_after = 25;
  FitOptions fit;
  // Required by the Nadaraya-Watson method.
  std::optional<ScoreOracle> score;
  // Feature-space flow when > 0: the map is searched on (Dp, particles) every
  // subspace_every iterations (warm started) and fits run in m dimensions.
  Eigen::Index subspace_dim = 0;
  int subspace_every = 10;
  SubspaceOptions subspace;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;

  void validate(Eigen::Index dim) const;
};

// Monitor value: held-out estimate of KL[particles, target].
[[nodiscard]] double flow_monitor(const Matrix& particles, const Matrix& target, const SigmaPolicy& policy,
                                  std::uint64_t seed, const FitOptions& base = {}, Exec exec = Exec::Parallel);

// Velocity of the chosen method at the particles themselves.
[[nodiscard]] Matrix estimate_field(const Matrix& dp, const Matrix& particles, const FlowOptions& opts, double sigma);

// Estimate-then-step for opts.iters iterations starting from q0.
// `last_map` receives the final feature map of a feature-space flow.
[[nodiscard]] FlowState run_flow(const Matrix& dp, const Matrix& q0, const FlowOptions& opts,
                                 FeatureMap* last_map = nullptr);

struct ImputeOptions {
  DivergenceId field = DivergenceId::ForwardKL;
  int iters = 100;
  double eta = 0.1;
  SigmaPolicy sigma = SigmaPolicy::cv();
  int cv_every = 10;
  // Mask columns enter the joint and product samples multiplied by this.
  double mask_scale = 1.0;
  FitOptions fit;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct ImputeRecord {
  int t = 0;
  double sigma = 0.0;
  // Mean absolute update of the free entries (standardized units).
  double mean_step = 0.0;
};

struct ImputeResult {
  Matrix imputed;
  std::vector<ImputeRecord> records;
};

// Fills entries with mask == 0. Observed entries are copied from x unchanged.
[[nodiscard]] ImputeResult impute(const Matrix& x, const Mask& mask, const ImputeOptions& opts);

// Column-mean imputation over observed entries.
[[nodiscard]] Matrix impute_column_mean(const Matrix& x, const Mask& mask);

struct AdaptOptions {
  int iters = 50;
  double eta = 0.1;
  double label_scale = 1.0;
  SigmaPolicy sigma = SigmaPolicy::median();
  FitOptions fit;
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct AdaptRecord {
  int t = 0;
  double sigma = 0.0;
  double accuracy = -1.0;  // -1 when target labels are not supplied
};

struct AdaptResult {
  LabeledSet transported;
  double accuracy_before = -1.0;
  double accuracy_after = -1.0;
  std::vector<AdaptRecord> records;
};

// Moves source features toward the target so that the joint (x, label)
// distributions align; target labels are proxied by 1-NN predictions from
// the current transported source. Source labels stay fixed. Target labels,
// when given, are used for evaluation only.
[[nodiscard]] AdaptResult adapt(const LabeledSet& source, const Matrix& target, const AdaptOptions& opts,
                                const std::vector<int>* target_labels = nullptr);

// 1-nearest-neighbour predictions of `queries` from a labeled set.
[[nodiscard]] std::vector<int> nearest_neighbor_labels(const LabeledSet& train, const Matrix& queries);
[[nodiscard]] double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

}  // namespace wgf
