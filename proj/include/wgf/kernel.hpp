#pragma once

#include "wgf/core.hpp"

namespace wgf {

struct KernelConfig {
  double sigma = 1.0;
};

void require_positive_sigma(double sigma);

// exp(-|x - x_star|^2 / (2 sigma^2)).
[[nodiscard]] double gauss_weight(RowRef x, RowRef x_star, double sigma);

// Pairwise squared distances between rows of a and rows of b, computed as
// |a|^2 + |b|^2 - 2 a.b with tiny negatives clamped to zero.
[[nodiscard]] Matrix sq_distances(const Matrix& a, const Matrix& b, Exec exec = Exec::Parallel);

// Gaussian kernel matrix K(i, j) = k_sigma(a_i, b_j).
[[nodiscard]] Matrix gauss_kernel(const Matrix& a, const Matrix& b, double sigma,
                                  Exec exec = Exec::Parallel);

// Median over unordered pairs of sqrt(squared distance / 2). Sets larger than
// max_points rows are thinned to an evenly strided subset first. Throws
// UsageError for fewer than two rows and DomainError when the median is zero.
inline constexpr Eigen::Index kMedianMaxPoints = 2000;
[[nodiscard]] double median_bandwidth(const Matrix& x, Eigen::Index max_points = kMedianMaxPoints);

// Median bandwidth of the row-wise union of two sets.
[[nodiscard]] double median_bandwidth(const Matrix& a, const Matrix& b,
                                      Eigen::Index max_points = kMedianMaxPoints);

}  // namespace wgf
