#include <doctest.h>

#include "wgf/datasets.hpp"
#include "wgf/kernel.hpp"
#include "wgf/selection.hpp"

#include <algorithm>
#include <cmath>

using namespace wgf;

TEST_CASE("fold assignment is balanced and seeded") {
  const std::vector<int> a = fold_assignment(23, 5, 9);
  const std::vector<int> b = fold_assignment(23, 5, 9);
  const std::vector<int> c = fold_assignment(23, 5, 10);
  CHECK(a == b);
  CHECK(a != c);
  for (int k = 0; k < 5; ++k) {
    const auto count = std::count(a.begin(), a.end(), k);
    CHECK(count >= 4);
    CHECK(count <= 5);
  }
  CHECK_THROWS_AS((void)fold_assignment(3, 5, 0), UsageError);
  CHECK_THROWS_AS((void)fold_assignment(10, 1, 0), UsageError);
}

TEST_CASE("single candidate is chosen") {
  const Matrix p = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 100, 1);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Constant(1, 0.5), 1.0, 100, 2);
  const SelectionReport r = select_bandwidth(p, q, DivergenceId::BackwardKL, {0.37}, 5, 0);
  CHECK(r.chosen == 0.37);
  CHECK(r.criterion.size() == 1);
  CHECK_THROWS_AS((void)select_bandwidth(p, q, DivergenceId::BackwardKL, {}, 5, 0), UsageError);
}

TEST_CASE("identical samples give a finite report") {
  const Matrix p = gen_gaussian(Eigen::RowVectorXd::Zero(2), 1.0, 150, 3);
  const SelectionReport r = select_bandwidth(p, p, DivergenceId::BackwardKL, default_candidates(p, p), 5, 1);
  for (double c : r.criterion) CHECK(std::isfinite(c));
  CHECK(std::find(r.candidates.begin(), r.candidates.end(), r.chosen) != r.candidates.end());
}

TEST_CASE("selection is deterministic under the seed") {
  const Matrix p = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 200, 4);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Constant(1, 1.0), 1.0, 200, 5);
  const auto a = select_bandwidth(p, q, DivergenceId::BackwardKL, default_candidates(p, q), 5, 7);
  const auto b = select_bandwidth(p, q, DivergenceId::BackwardKL, default_candidates(p, q), 5, 7);
  CHECK(a.criterion == b.criterion);
  CHECK(a.chosen == b.chosen);
}

TEST_CASE("chosen bandwidth is no worse than the worst candidate") {
  // p = N(0,1), q = N(-1, 0.25^2): grad log r(x) = -x + 16 (x + 1).
  const Matrix p = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 1000, 6);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Constant(1, -1.0), 0.25, 1000, 7);
  const std::vector<double> cands = {0.05, 0.2, 0.8, 3.2};
  const SelectionReport r = select_bandwidth(p, q, DivergenceId::BackwardKL, cands, 5, 2);
  const Matrix queries = q.topRows(100);
  auto error = [&](double sigma) {
    FitOptions o;
    o.sigma = sigma;
    const Matrix v = velocity_field(queries, p, q, DivergenceId::BackwardKL, o);
    double e = 0.0;
    for (Eigen::Index j = 0; j < queries.rows(); ++j) {
      const double x = queries(j, 0);
      e += std::abs(v(j, 0) - (-x + 16.0 * (x + 1.0)));
    }
    return e / static_cast<double>(queries.rows());
  };
  double worst = 0.0;
  for (double s : cands) worst = std::max(worst, error(s));
  CHECK(error(r.chosen) <= worst);
}

TEST_CASE("divergence estimate examples") {
  const Matrix a = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 2000, 8);
  const Matrix p = a.topRows(1000);
  const Matrix q = a.bottomRows(1000);
  CHECK(std::abs(divergence_estimate(p, q, DivergenceId::ForwardKL, SigmaPolicy::median(), 1)) <= 0.02);

  const Matrix p5 = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 5000, 9);
  const Matrix q5 = gen_gaussian(Eigen::RowVectorXd::Constant(1, 1.0), 1.0, 5000, 10);
  CHECK(divergence_estimate(p5, q5, DivergenceId::ForwardKL, SigmaPolicy::median(), 1) ==
        doctest::Approx(0.5).epsilon(0.2));

  CHECK_THROWS_AS((void)divergence_estimate(p, Matrix(0, 1), DivergenceId::ForwardKL, SigmaPolicy::median(), 1),
                  UsageError);
}

TEST_CASE("sigma policy parsing") {
  CHECK(SigmaPolicy::parse("cv").kind == SigmaPolicy::Kind::CV);
  CHECK(SigmaPolicy::parse("median").kind == SigmaPolicy::Kind::Median);
  CHECK(SigmaPolicy::parse("0.25").value == 0.25);
  CHECK_THROWS_AS((void)SigmaPolicy::parse("-1"), UsageError);
  CHECK_THROWS_AS((void)SigmaPolicy::parse("wide"), UsageError);
}
