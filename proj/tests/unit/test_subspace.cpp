#include <doctest.h>

#include "wgf/datasets.hpp"
#include "wgf/kernel.hpp"
#include "wgf/subspace.hpp"

#include <cmath>

using namespace wgf;

TEST_CASE("lifted velocity examples") {
  FeatureMap id;
  id.s = Matrix::Identity(3, 3);
  id.centre = Eigen::RowVectorXd::Zero(3);
  const Eigen::VectorXd w = Eigen::Vector3d(1.0, -2.0, 0.5);
  CHECK(lifted_velocity(id, w) == w);

  FeatureMap two;
  two.s = Matrix::Identity(5, 5).leftCols(2);
  two.centre = Eigen::RowVectorXd::Zero(5);
  Eigen::VectorXd expected(5);
  expected << 1.0, 2.0, 0.0, 0.0, 0.0;
  CHECK(lifted_velocity(two, Eigen::VectorXd(Eigen::Vector2d(1.0, 2.0))) == expected);
  CHECK(lifted_velocity(two, Eigen::VectorXd(Eigen::VectorXd::Zero(2))).isZero());
  CHECK_THROWS_AS((void)lifted_velocity(two, Eigen::VectorXd::Zero(3).eval()), ShapeError);
}

TEST_CASE("initial map is orthonormal and m is checked") {
  const Matrix p = gen_subspace5d(Link::Sin, 400, 1);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Zero(5), 1.0, 400, 2);
  SubspaceOptions o;
  o.init_gradients = false;
  const FeatureMap map = initial_feature_map(p, q, 2, o);
  CHECK(map.orthonormality_error() <= 1e-10);
  CHECK_THROWS_AS((void)initial_feature_map(p, q, 0, o), UsageError);
  CHECK_THROWS_AS((void)initial_feature_map(p, q, 6, o), UsageError);
}

TEST_CASE("zero outer iterations return the initialization") {
  const Matrix p = gen_subspace5d(Link::Cos, 300, 3);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Zero(5), 1.0, 300, 4);
  SubspaceOptions o;
  o.outer_iters = 0;
  o.init_gradients = false;
  const FeatureMap init = initial_feature_map(p, q, 2, o);
  const FeatureMap out = search_feature_map(p, q, 2, DivergenceId::BackwardKL, o, nullptr, &init);
  CHECK(out.s == init.s);
  CHECK(out.centre == init.centre);
}

TEST_CASE("search keeps the map orthonormal") {
  const Matrix p = gen_subspace5d(Link::Sin, 400, 5);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Zero(5), 1.0, 400, 6);
  SubspaceOptions o;
  o.outer_iters = 4;
  o.max_fit_points = 100;
  o.fit.sigma = 1.0;
  std::vector<double> obj;
  const FeatureMap map = search_feature_map(p, q, 2, DivergenceId::BackwardKL, o, &obj);
  CHECK(map.orthonormality_error() <= 1e-10);
  CHECK_FALSE(obj.empty());
}

TEST_CASE("full-dimensional map reproduces the full-space field") {
  const Matrix p = gen_gaussian(Eigen::RowVectorXd::Constant(2, 0.5), 1.0, 300, 7);
  const Matrix q = gen_gaussian(Eigen::RowVectorXd::Zero(2), 1.0, 300, 8);
  SubspaceOptions o;
  const FeatureMap map = initial_feature_map(p, q, 2, o);
  FitOptions f;
  f.sigma = 0.8;
  const Matrix queries = q.topRows(5);
  const Matrix full = velocity_field(queries, p, q, DivergenceId::BackwardKL, f);
  const Matrix lifted = feature_velocity_field(map, queries, p, q, DivergenceId::BackwardKL, f);
  CHECK((full - lifted).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("principal angles") {
  const Matrix e12 = Matrix::Identity(5, 5).leftCols(2);
  CHECK(max_principal_angle(e12, e12) == doctest::Approx(0.0));
  Matrix rot = e12;
  rot.col(1) = Matrix::Identity(5, 5).col(2);
  CHECK(max_principal_angle(e12, rot) == doctest::Approx(std::acos(0.0)));
}
