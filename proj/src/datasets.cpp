#include "wgf/datasets.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace wgf {

namespace {

void require_count(Eigen::Index n, const char* what) {
  if (n < 0) throw UsageError(std::string(what) + ": sample count must be nonnegative");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

Matrix gen_gaussian(const Eigen::RowVectorXd& mean, double sd, Eigen::Index n, std::uint64_t seed) {
  require_count(n, "gen_gaussian");
  if (!(sd > 0.0)) throw UsageError("gen_gaussian: sd must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(n, mean.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < mean.size(); ++c) x(i, c) = mean(c) + sd * z(rng);
  }
  return x;
}

Matrix gen_mixture(const MixtureSpec& spec, Eigen::Index n, std::uint64_t seed, std::vector<int>* component) {
  require_count(n, "gen_mixture");
  spec.validate();
  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(spec.weights.begin(), spec.weights.end());
  std::normal_distribution<double> z(0.0, 1.0);
  const Eigen::Index d = spec.dim();
  Matrix x(n, d);
  if (component != nullptr) component->assign(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int k = pick(rng);
    const auto ku = static_cast<std::size_t>(k);
    for (Eigen::Index c = 0; c < d; ++c) x(i, c) = spec.means[ku](c) + spec.sds[ku] * z(rng);
    if (component != nullptr) (*component)[static_cast<std::size_t>(i)] = k;
  }
  return x;
}

Matrix gen_s_shape(Eigen::Index n, double noise, std::uint64_t seed) {
  require_count(n, "gen_s_shape");
  if (!(noise >= 0.0)) throw UsageError("gen_s_shape: noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  constexpr double pi = std::numbers::pi;
  Matrix x(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool upper = u(rng) < 0.5;
    const double t = u(rng);
    // Upper arc sweeps angles [pi/2, 3pi/2] around (0, 1); lower arc sweeps [-pi/2, pi/2] around (0, -1).
    const double phi = upper ? pi * (0.5 + t) : pi * (t - 0.5);
    const double cy = upper ? 1.0 : -1.0;
    x(i, 0) = std::cos(phi) + noise * z(rng);
    x(i, 1) = cy + std::sin(phi) + noise * z(rng);
  }
  return x;
}

Link parse_link(const std::string& name) {
  if (name == "sin") return Link::Sin;
  if (name == "cos") return Link::Cos;
  throw UsageError("unknown link '" + name + "' (expected sin or cos)");
}

Matrix gen_subspace5d(Link g, Eigen::Index n, std::uint64_t seed) {
  require_count(n, "gen_subspace5d");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix x(n, 5);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 1; c < 5; ++c) x(i, c) = z(rng);
    const double gx = g == Link::Sin ? std::sin(x(i, 1)) : std::cos(x(i, 1));
    x(i, 0) = gx + z(rng);
  }
  return x;
}

LabeledSet gen_blobs(const std::vector<Eigen::RowVectorXd>& centres, double sd, Eigen::Index n_per_class,
                     const Eigen::RowVectorXd& shift, std::uint64_t seed) {
  if (centres.empty()) throw UsageError("gen_blobs: no centres");
  if (!(sd > 0.0)) throw UsageError("gen_blobs: sd must be positive");
  require_count(n_per_class, "gen_blobs");
  const Eigen::Index d = centres.front().size();
  if (shift.size() != d) throw ShapeError("gen_blobs: shift dimension mismatch");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  LabeledSet out;
  out.x.resize(n_per_class * static_cast<Eigen::Index>(centres.size()), d);
  Eigen::Index r = 0;
  for (std::size_t k = 0; k < centres.size(); ++k) {
    if (centres[k].size() != d) throw ShapeError("gen_blobs: centres differ in dimension");
    for (Eigen::Index i = 0; i < n_per_class; ++i, ++r) {
      for (Eigen::Index c = 0; c < d; ++c) out.x(r, c) = centres[k](c) + shift(c) + sd * z(rng);
      out.labels.push_back(static_cast<int>(k));
    }
  }
  return out;
}

Mask mcar_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("mcar_mask: rate must lie in [0, 1)");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Mask m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = u(rng) < rate ? 0 : 1;
  }
  return m;
}

ColumnStats observed_stats(const Matrix& x, const Mask& mask) {
  if (mask.rows() != x.rows() || mask.cols() != x.cols()) throw ShapeError("mask shape does not match data");
  ColumnStats s{Eigen::RowVectorXd(x.cols()), Eigen::RowVectorXd(x.cols())};
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (mask(i, c) != 0) {
        sum += x(i, c);
        ++count;
      }
    }
    if (count == 0) throw UsageError("column " + std::to_string(c + 1) + " has no observed entries");
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      if (mask(i, c) != 0) ss += (x(i, c) - mean) * (x(i, c) - mean);
    }
    s.mean(c) = mean;
    s.sd(c) = std::sqrt(ss / static_cast<double>(count));
  }
  return s;
}

std::pair<Matrix, ColumnStats> standardize(const Matrix& x, const Mask& mask) {
  ColumnStats s = observed_stats(x, mask);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (!(s.sd(c) >= kSdFloor)) {
      throw DomainError("column " + std::to_string(c + 1) + " is constant over its observed entries");
    }
  }
  Matrix z = (x.rowwise() - s.mean).array().rowwise() / s.sd.array();
  return {std::move(z), std::move(s)};
}

Matrix destandardize(const Matrix& z, const ColumnStats& stats) {
  if (stats.mean.size() != z.cols() || stats.sd.size() != z.cols()) throw ShapeError("stats do not match data");
  return (z.array().rowwise() * stats.sd.array()).matrix().rowwise() + stats.mean;
}

Mask mask_from_values(const Matrix& x) {
  Mask m(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) m(i, c) = std::isfinite(x(i, c)) ? 1 : 0;
  }
  return m;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw UsageError("'" + path + "' is empty (a header row is required)");
  t.header = split(line);
  const auto d = static_cast<Eigen::Index>(t.header.size());
  std::vector<double> values;
  Eigen::Index rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    if (static_cast<Eigen::Index>(cells.size()) != d) {
      throw ShapeError("'" + path + "' line " + std::to_string(lineno) + ": expected " + std::to_string(d) +
                       " cells, found " + std::to_string(cells.size()));
    }
    for (const std::string& cell : cells) {
      if (cell.empty()) {
        values.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw UsageError("'" + path + "' line " + std::to_string(lineno) + ": cannot parse '" + cell + "'");
      }
      values.push_back(v);
    }
    ++rows;
  }
  t.values = Eigen::Map<const Matrix>(values.data(), rows, d);
  t.observed = mask_from_values(t.values);
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const Mask* observed) {
  if (static_cast<Eigen::Index>(header.size()) != values.cols()) throw ShapeError("write_csv: header width mismatch");
  if (observed != nullptr && (observed->rows() != values.rows() || observed->cols() != values.cols())) {
    throw ShapeError("write_csv: mask shape mismatch");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  for (std::size_t c = 0; c < header.size(); ++c) out << (c ? "," : "") << header[c];
  out << '\n';
  char buf[64];
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      if (c) out << ',';
      if (observed != nullptr && (*observed)(i, c) == 0) continue;
      const auto res = std::to_chars(buf, buf + sizeof buf, values(i, c));
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<std::string> default_header(Eigen::Index d, const std::string& prefix) {
  std::vector<std::string> h;
  for (Eigen::Index c = 0; c < d; ++c) h.push_back(prefix + std::to_string(c + 1));
  return h;
}

}  // namespace wgf
