#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace wgf {

// Samples are stored one observation per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowRef = Eigen::Ref<const Eigen::RowVectorXd>;

// 1 = observed (frozen during a flow), 0 = missing (free).
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LabeledSet {
  Matrix x;
  std::vector<int> labels;

  [[nodiscard]] Eigen::Index rows() const { return x.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return x.cols(); }
};

// Execution policy for the per-query kernels. Serial and Parallel produce
// bit-identical results because every query writes only its own row.
enum class Exec { Serial, Parallel };

// Input shapes or arguments that the caller got wrong. The CLI maps these to
// exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ShapeError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DegenerateNeighborhood : public std::runtime_error {
 public:
  DegenerateNeighborhood(Eigen::Index query, const std::string& what)
      : std::runtime_error(what), query_(query) {}
  [[nodiscard]] Eigen::Index query() const { return query_; }

 private:
  Eigen::Index query_;
};

class RankDeficient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OptimizerDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require_same_dim(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.cols()) {
    throw ShapeError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()) + " columns)");
  }
}

inline void require_nonempty(const Matrix& a, const char* what) {
  if (a.rows() == 0) throw UsageError(std::string(what) + ": empty sample set");
}

// Stateless seed derivation (splitmix64). Each module asks for its own stream
// so results do not depend on the order in which modules consume randomness.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// Stream identifiers used with derive_seed.
namespace stream {
inline constexpr std::uint64_t kFolds = 1;
inline constexpr std::uint64_t kImputeInit = 2;
inline constexpr std::uint64_t kImputePermute = 3;
inline constexpr std::uint64_t kSubspace = 4;
inline constexpr std::uint64_t kGenerate = 5;
inline constexpr std::uint64_t kMask = 6;
inline constexpr std::uint64_t kMonitor = 7;
}  // namespace stream

void set_num_threads(int threads);
int max_threads();

}  // namespace wgf
