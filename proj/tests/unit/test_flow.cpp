#include <doctest.h>

#include "wgf/datasets.hpp"
#include "wgf/flow.hpp"
#include "wgf/selection.hpp"

#include <cmath>

using namespace wgf;

TEST_CASE("step arithmetic") {
  FlowState s;
  s.particles = Matrix::Constant(4, 3, 2.0);
  s.eta = 0.1;
  const FlowState still = step(s, Matrix::Zero(4, 3));
  CHECK(still.t == 1);
  CHECK(still.particles == s.particles);
  const FlowState moved = step(s, Matrix::Ones(4, 3));
  CHECK((moved.particles.array() - 2.1).abs().maxCoeff() <= 1e-15);
  CHECK_THROWS_AS((void)step(s, Matrix::Ones(3, 3)), ShapeError);
  Matrix bad = Matrix::Zero(4, 3);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS((void)step(s, bad), DomainError);
}

TEST_CASE("step respects the mask") {
  FlowState s;
  s.particles = Matrix::Zero(3, 2);
  s.eta = 0.5;
  Mask m = Mask::Zero(3, 2);
  m.col(0).setOnes();
  s.mask = m;
  const FlowState out = step(s, Matrix::Ones(3, 2));
  CHECK(out.particles.col(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(out.particles.col(1).minCoeff() == doctest::Approx(0.5));
}

TEST_CASE("flow rejects zero iterations") {
  FlowOptions o;
  o.iters = 0;
  const Matrix x = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 20, 1);
  CHECK_THROWS_AS((void)run_flow(x, x, o), UsageError);
}

TEST_CASE("toy flow drives the monitor to zero") {
  const Matrix dp = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 500, 101);
  const Matrix q0 = gen_gaussian(Eigen::RowVectorXd::Constant(1, -1.0), 0.25, 500, 102);
  FlowOptions o;
  o.iters = 20;
  o.eta = 0.1;
  o.seed = 3;
  const FlowState s = run_flow(dp, q0, o);
  REQUIRE_FALSE(s.history.empty());
  CHECK(s.history.front().value > 0.5);
  CHECK(s.history.back().t == 20);
  CHECK(s.history.back().value <= 0.05);
}

TEST_CASE("flow from a copy of the target barely moves") {
  const Matrix dp = gen_gaussian(Eigen::RowVectorXd::Zero(1), 1.0, 400, 111);
  FlowOptions o;
  o.iters = 5;
  o.seed = 1;
  const FlowState s = run_flow(dp, dp, o);
  CHECK(std::abs(s.history.front().value) <= 0.02);
  CHECK((s.particles - dp).cwiseAbs().maxCoeff() <= 0.1);
}

TEST_CASE("impute leaves complete data untouched") {
  const Matrix x = gen_gaussian(Eigen::RowVectorXd::Zero(2), 1.0, 50, 7);
  ImputeOptions o;
  o.iters = 3;
  o.sigma = SigmaPolicy::median();
  const ImputeResult r = impute(x, Mask::Ones(50, 2), o);
  CHECK(r.imputed == x);
}

TEST_CASE("impute is deterministic and keeps observed entries") {
  const Matrix x = gen_s_shape(200, 0.1, 9);
  const Mask m = mcar_mask(200, 2, 0.2, 10);
  Matrix holes = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (m(i, c) == 0) holes(i, c) = std::nan("");
    }
  }
  ImputeOptions o;
  o.iters = 5;
  o.sigma = SigmaPolicy::median();
  o.seed = 4;
  const ImputeResult a = impute(holes, m, o);
  const ImputeResult b = impute(holes, m, o);
  CHECK(a.imputed == b.imputed);
  CHECK(a.imputed.allFinite());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (m(i, c) == 1) CHECK(a.imputed(i, c) == x(i, c));
    }
  }
}

TEST_CASE("impute surfaces a fully missing column") {
  Matrix x = gen_gaussian(Eigen::RowVectorXd::Zero(2), 1.0, 30, 5);
  Mask m = Mask::Ones(30, 2);
  m.col(1).setZero();
  ImputeOptions o;
  o.iters = 2;
  CHECK_THROWS_AS((void)impute(x, m, o), UsageError);
}

TEST_CASE("column-mean imputation") {
  Matrix x(3, 1);
  x << 1.0, 5.0, std::nan("");
  Mask m(3, 1);
  m << 1, 1, 0;
  CHECK(impute_column_mean(x, m)(2, 0) == doctest::Approx(3.0));
}

TEST_CASE("adaptation on shifted blobs does not lose accuracy") {
  std::vector<Eigen::RowVectorXd> centres(2, Eigen::RowVectorXd::Zero(2));
  centres[0] << -2.0, 0.0;
  centres[1] << 2.0, 0.0;
  const LabeledSet src = gen_blobs(centres, 0.7, 60, Eigen::RowVectorXd::Zero(2), 1);
  Eigen::RowVectorXd shift(2);
  shift << 1.5, 1.5;
  const LabeledSet tgt = gen_blobs(centres, 0.7, 60, shift, 2);
  AdaptOptions o;
  o.iters = 30;
  o.seed = 2;
  const AdaptResult r = adapt(src, tgt.x, o, &tgt.labels);
  CHECK(r.accuracy_after >= r.accuracy_before);
  CHECK(r.transported.labels == src.labels);
}

TEST_CASE("adaptation without a shift keeps the 1-NN accuracy") {
  std::vector<Eigen::RowVectorXd> centres(2, Eigen::RowVectorXd::Zero(2));
  centres[0] << -2.0, 0.0;
  centres[1] << 2.0, 0.0;
  const LabeledSet src = gen_blobs(centres, 0.7, 60, Eigen::RowVectorXd::Zero(2), 11);
  const LabeledSet tgt = gen_blobs(centres, 0.7, 60, Eigen::RowVectorXd::Zero(2), 12);
  AdaptOptions o;
  o.iters = 10;
  o.label_scale = 0.0;
  const AdaptResult r = adapt(src, tgt.x, o, &tgt.labels);
  CHECK(std::abs(r.accuracy_after - r.accuracy_before) <= 0.05);
}
