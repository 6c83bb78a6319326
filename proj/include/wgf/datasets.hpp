#pragma once

#include "wgf/core.hpp"
#include "wgf/score.hpp"

#include <string>
#include <utility>
#include <vector>

namespace wgf {

// n draws from N(mean, sd^2 I).
[[nodiscard]] Matrix gen_gaussian(const Eigen::RowVectorXd& mean, double sd, Eigen::Index n, std::uint64_t seed);

// n draws from an isotropic Gaussian mixture. `component` receives the
// component index of each row when non-null.
[[nodiscard]] Matrix gen_mixture(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed,
                                 std::vector<int>* component = nullptr);

// Two joined half circles of radius 1 forming an upright S: the upper arc is
// the left half of the circle centred at (0, 1), the lower arc the right half
// of the circle centred at (0, -1). Gaussian noise with sd `noise` is added
// to both coordinates.
[[nodiscard]] Matrix gen_s_shape(Eigen::Index n, double noise, std::uint64_t seed);

enum class Link { Sin, Cos };
[[nodiscard]] Link parse_link(const std::string& name);

// Five-dimensional sample with X1 = g(X2) + eps, eps ~ N(0, 1), and X2..X5
// standard normal. Its density ratio against N(0, I) depends on (X1, X2) only.
[[nodiscard]] Matrix gen_subspace5d(Link g, Eigen::Index n, std::uint64_t seed);

// Gaussian blobs with one class per centre, every point shifted by `shift`.
[[nodiscard]] LabeledSet gen_blobs(const std::vector<Eigen::RowVectorXd>& centres, double sd,
                                   Eigen::Index n_per_class, const Eigen::RowVectorXd& shift, std::uint64_t seed);

// Every entry independently missing (0) with probability `rate`.
[[nodiscard]] Mask mcar_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed);

struct ColumnStats {
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd sd;
};

inline constexpr double kSdFloor = 1e-12;

// Column mean and standard deviation over observed entries only.
[[nodiscard]] ColumnStats observed_stats(const Matrix& x, const Mask& mask);

// (x - mean) / sd column-wise using observed-entry statistics. Missing
// entries are transformed as well (their values are ignored downstream).
// Throws UsageError for a fully missing column and DomainError when an
// observed sd is below kSdFloor.
[[nodiscard]] std::pair<Matrix, ColumnStats> standardize(const Matrix& x, const Mask& mask);
[[nodiscard]] Matrix destandardize(const Matrix& z, const ColumnStats& stats);

// Mask with 1 wherever x is finite.
[[nodiscard]] Mask mask_from_values(const Matrix& x);

// CSV with a header row; empty cells are missing (NaN, mask 0).
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;
  Mask observed;
};

[[nodiscard]] CsvTable read_csv(const std::string& path);

// Writes full-precision values; entries with observed == 0 are left empty.
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const Mask* observed = nullptr);

// x1, x2, ... for d columns.
[[nodiscard]] std::vector<std::string> default_header(Eigen::Index d, const std::string& prefix = "x");

}  // namespace wgf
