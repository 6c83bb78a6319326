#include "wgf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace wgf {

void require_positive_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw UsageError("kernel bandwidth must be a positive finite number, got " + std::to_string(sigma));
  }
}

double gauss_weight(RowRef x, RowRef x_star, double sigma) {
  require_positive_sigma(sigma);
  if (x.size() != x_star.size()) throw ShapeError("gauss_weight: dimension mismatch");
  return std::exp(-(x - x_star).squaredNorm() / (2.0 * sigma * sigma));
}

Matrix sq_distances(const Matrix& a, const Matrix& b, Exec exec) {
  require_same_dim(a, b, "sq_distances");
  const Eigen::VectorXd an = a.rowwise().squaredNorm();
  const Eigen::VectorXd bn = b.rowwise().squaredNorm();
  Matrix out(a.rows(), b.rows());
  const Eigen::Index n = a.rows();
#pragma omp parallel for schedule(static) if (exec == Exec::Parallel)
  for (Eigen::Index i = 0; i < n; ++i) {
    out.row(i).noalias() = (b * a.row(i).transpose()).transpose();
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      out(i, j) = std::max(0.0, an(i) + bn(j) - 2.0 * out(i, j));
    }
  }
  return out;
}

Matrix gauss_kernel(const Matrix& a, const Matrix& b, double sigma, Exec exec) {
  require_positive_sigma(sigma);
  Matrix k = sq_distances(a, b, exec);
  const double scale = -1.0 / (2.0 * sigma * sigma);
  k = (k.array() * scale).exp().matrix();
  return k;
}

namespace {

Matrix thin(const Matrix& x, Eigen::Index max_points) {
  if (max_points <= 1 || x.rows() <= max_points) return x;
  Matrix out(max_points, x.cols());
  for (Eigen::Index i = 0; i < max_points; ++i) {
    out.row(i) = x.row(i * x.rows() / max_points);
  }
  return out;
}

}  // namespace

double median_bandwidth(const Matrix& x, Eigen::Index max_points) {
  if (x.rows() < 2) throw UsageError("median_bandwidth: need at least two points");
  const Matrix pts = thin(x, max_points);
  std::vector<double> vals;
  const Eigen::Index n = pts.rows();
  const Eigen::Index d = pts.cols();
  vals.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  // Select on squared distances; the map to sqrt(d2 / 2) is monotone.
  for (Eigen::Index i = 0; i < n; ++i) {
    const double* xi = pts.data() + i * d;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double* xj = pts.data() + j * d;
      double s = 0.0;
      for (Eigen::Index c = 0; c < d; ++c) s += (xi[c] - xj[c]) * (xi[c] - xj[c]);
      vals.push_back(s);
    }
  }
  const std::size_t mid = vals.size() / 2;
  std::nth_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid), vals.end());
  double med = std::sqrt(vals[mid] / 2.0);
  if (vals.size() % 2 == 0) {
    const double lower = *std::max_element(vals.begin(), vals.begin() + static_cast<std::ptrdiff_t>(mid));
    med = 0.5 * (med + std::sqrt(lower / 2.0));
  }
  if (!(med > 0.0)) throw DomainError("median_bandwidth: degenerate bandwidth (median pairwise distance is zero)");
  return med;
}

double median_bandwidth(const Matrix& a, const Matrix& b, Eigen::Index max_points) {
  require_same_dim(a, b, "median_bandwidth");
  // Thin each half separately so both sets stay represented.
  const Eigen::Index half = max_points / 2;
  const Matrix ta = thin(a, half);
  const Matrix tb = thin(b, half);
  Matrix both(ta.rows() + tb.rows(), a.cols());
  both << ta, tb;
  return median_bandwidth(both, both.rows());
}

}  // namespace wgf
