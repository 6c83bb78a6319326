#include "wgf/subspace.hpp"

#include "wgf/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

namespace wgf {

namespace {

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& a) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  // Positive diagonal of R keeps columns continuous across small updates.
  for (Eigen::Index k = 0; k < a.cols(); ++k) {
    if (r(k, k) < 0.0) q.col(k) *= -1.0;
  }
  return q;
}

Matrix strided(const Matrix& x, Eigen::Index max_rows) {
  if (max_rows <= 0 || x.rows() <= max_rows) return x;
  Matrix out(max_rows, x.cols());
  for (Eigen::Index r = 0; r < max_rows; ++r) out.row(r) = x.row(r * x.rows() / max_rows);
  return out;
}

void check_m(Eigen::Index m, Eigen::Index d) {
  if (m < 1 || m > d) {
    throw UsageError("subspace dimension m=" + std::to_string(m) + " must lie in [1, " + std::to_string(d) + "]");
  }
}

}  // namespace

Matrix FeatureMap::project(const Matrix& x) const {
  if (x.cols() != s.rows()) throw ShapeError("feature map: input dimension mismatch");
  return (x.rowwise() - centre) * s;
}

double FeatureMap::orthonormality_error() const {
  return (s.transpose() * s - Eigen::MatrixXd::Identity(s.cols(), s.cols())).norm();
}

FeatureMap initial_feature_map(const Matrix& dp, const Matrix& dq, Eigen::Index m, const SubspaceOptions& opts) {
  require_nonempty(dp, "feature map");
  require_nonempty(dq, "feature map");
  require_same_dim(dp, dq, "feature map");
  const Eigen::Index d = dp.cols();
  check_m(m, d);
  const double np = static_cast<double>(dp.rows());
  const double nq = static_cast<double>(dq.rows());
  FeatureMap map;
  map.centre = (dp.colwise().sum() + dq.colwise().sum()) / (np + nq);
  const Matrix cp = dp.rowwise() - map.centre;
  const Matrix cq = dq.rowwise() - map.centre;
  const Eigen::MatrixXd diff = cp.transpose() * cp / np - cq.transpose() * cq / nq;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(diff);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(eig.eigenvalues()(a)) > std::abs(eig.eigenvalues()(b));
  });
  const double lead = std::abs(eig.eigenvalues()(order[0]));

  std::mt19937_64 rng(derive_seed(opts.seed, stream::kSubspace));
  std::normal_distribution<double> z(0.0, 1.0);

  // Noise level: the same statistic after randomly relabelling the pooled
  // rows into groups of the original sizes.
  double noise = 0.0;
  {
    Matrix pooled(cp.rows() + cq.rows(), d);
    pooled << cp, cq;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pooled.rows()));
    for (int rep = 0; rep < opts.init_null_draws; ++rep) {
      std::iota(idx.begin(), idx.end(), Eigen::Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
      Eigen::MatrixXd b = Eigen::MatrixXd::Zero(d, d);
      for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto row = pooled.row(idx[r]);
        if (static_cast<Eigen::Index>(r) < cp.rows()) {
          a.noalias() += row.transpose() * row;
        } else {
          b.noalias() += row.transpose() * row;
        }
      }
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> null_eig(a / np - b / nq, Eigen::EigenvaluesOnly);
      noise = std::max(noise, null_eig.eigenvalues().cwiseAbs().maxCoeff());
    }
  }

  Eigen::MatrixXd s(d, m);
  Eigen::Index strong = 0;
  for (; strong < m; ++strong) {
    const double lam = std::abs(eig.eigenvalues()(order[static_cast<std::size_t>(strong)]));
    if (!(lead > 0.0 && lam >= opts.init_eig_ratio * lead && lam > opts.init_null_margin * noise)) break;
    s.col(strong) = eig.eigenvectors().col(order[static_cast<std::size_t>(strong)]);
  }
  if (strong == m) {
    map.s = orthonormal_basis(s);
    return map;
  }
  // Weak moment directions carry no signal (a ratio can depend on a
  // direction without changing its second moments). Full-space field
  // estimates grad log r lie in the ratio-preserving subspace; the part of
  // their leading m-dimensional eigenspace outside the strong columns fills
  // the remaining ones.
  Eigen::MatrixXd fill;
  if (opts.init_gradients) {
    const Matrix ep = strided(dp, opts.max_fit_points);
    const Matrix eq = strided(dq, opts.max_fit_points);
    Matrix pts(ep.rows() + eq.rows(), d);
    pts << ep, eq;
    FitOptions fit = opts.fit;
    fit.sigma = median_bandwidth(dp, dq);
    const Matrix w = velocity_field(pts, dp, dq, DivergenceId::BackwardKL, fit, opts.exec);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> g(w.transpose() * w);
    const Eigen::MatrixXd top = g.eigenvectors().rightCols(m);
    const Eigen::MatrixXd rest = top - s.leftCols(strong) * (s.leftCols(strong).transpose() * top);
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(rest, Eigen::ComputeThinU);
    // Singular values near zero mean the eigenspace lies inside the strong columns.
    Eigen::Index usable = 0;
    while (usable < m - strong && svd.singularValues()(usable) > 1e-3) ++usable;
    fill = svd.matrixU().leftCols(usable);
  }
  for (Eigen::Index k = strong; k < m; ++k) {
    if (k - strong < fill.cols()) {
      s.col(k) = fill.col(k - strong);
      continue;
    }
    // No signal in either statistic: a random direction orthogonal to the columns so far.
    Eigen::VectorXd v(d);
    for (int attempt = 0; attempt < 100; ++attempt) {
      for (Eigen::Index c = 0; c < d; ++c) v(c) = z(rng);
      for (Eigen::Index j = 0; j < k; ++j) v -= s.col(j).dot(v) * s.col(j);
      if (v.norm() > 1e-6) break;
    }
    s.col(k) = v.normalized();
  }
  map.s = orthonormal_basis(s);
  return map;
}

FeatureMap search_feature_map(const Matrix& dp, const Matrix& dq, Eigen::Index m, DivergenceId field,
                              const SubspaceOptions& opts, std::vector<double>* objective, const FeatureMap* init) {
  if (opts.outer_iters < 0) throw UsageError("outer_iters must be nonnegative");
  if (!(opts.learning_rate > 0.0)) throw UsageError("subspace learning rate must be positive");
  opts.fit.validate();
  FeatureMap map = init != nullptr ? *init : initial_feature_map(dp, dq, m, opts);
  check_m(map.m(), dp.cols());
  if (map.input_dim() != dp.cols()) throw ShapeError("initial feature map dimension mismatch");

  const DivergenceId mirror = mirror_of(field);
  const Interval dom = conj_domain(mirror);
  const Matrix eval_p = strided(dp, opts.max_fit_points);
  const Matrix eval_q = strided(dq, opts.max_fit_points);
  const double inv_p = 1.0 / static_cast<double>(eval_p.rows());
  const double inv_q = 1.0 / static_cast<double>(eval_q.rows());
  double previous = 0.0;
  double best_value = 0.0;
  double scale = 0.0;
  FeatureMap best = map;

  for (int it = 0; it < opts.outer_iters; ++it) {
    const Matrix zp = map.project(dp);
    const Matrix zq = map.project(dq);
    Matrix queries(eval_p.rows() + eval_q.rows(), map.m());
    queries << map.project(eval_p), map.project(eval_q);
    const std::vector<LocalFit> fits = fit_field(queries, zp, zq, field, opts.fit, opts.exec);

    // Plug-in objective and its gradient in S with (w, b) held fixed.
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(map.input_dim(), map.m());
    double value = 0.0;
    for (Eigen::Index j = 0; j < queries.rows(); ++j) {
      const LocalFit& fit = fits[static_cast<std::size_t>(j)];
      const double dhat = fit.predict(queries.row(j));
      const bool from_p = j < eval_p.rows();
      const Eigen::RowVectorXd xc = (from_p ? eval_p.row(j) : eval_q.row(j - eval_p.rows())) - map.centre;
      if (from_p) {
        value += dhat * inv_p;
        grad += inv_p * xc.transpose() * fit.w;
      } else {
        if (!dom.contains(dhat)) throw OptimizerDivergence("subspace search: fitted d left the conjugate domain");
        const ConjugateValue c = conjugate_all(mirror, dhat);
        value -= c.value * inv_q;
        grad -= (inv_q * c.prime) * xc.transpose() * fit.w;
      }
    }
    if (!std::isfinite(value) || !grad.allFinite()) throw OptimizerDivergence("subspace search: non-finite objective");
    if (objective != nullptr) objective->push_back(value);
    if (it == 0 || value > best_value) {
      best_value = value;
      best = map;
    }
    if (it > 0 && std::abs(value - previous) <= opts.stall_tol * std::max(std::abs(previous), 1e-300)) break;
    previous = value;

    // Tangent component only; the normal part would be undone by the QR.
    const Eigen::MatrixXd sg = map.s.transpose() * grad;
    const Eigen::MatrixXd tangent = grad - map.s * (0.5 * (sg + sg.transpose()));
    // Steps are scaled once by the first gradient so that the first move has
    // length learning_rate; later moves shrink with the gradient.
    if (it == 0) scale = tangent.norm();
    if (!(scale > 0.0)) break;
    map.s = orthonormal_basis(map.s + (opts.learning_rate / scale) * tangent);
  }
  return opts.outer_iters > 0 ? best : map;
}

Eigen::VectorXd lifted_velocity(const FeatureMap& map, const Eigen::VectorXd& w_low) {
  if (w_low.size() != map.m()) throw ShapeError("lifted_velocity: w has the wrong dimension");
  return map.s * w_low;
}

Matrix lifted_velocity(const FeatureMap& map, const Matrix& w_low) {
  if (w_low.cols() != map.m()) throw ShapeError("lifted_velocity: w has the wrong dimension");
  return w_low * map.s.transpose();
}

Matrix feature_velocity_field(const FeatureMap& map, const Matrix& queries, const Matrix& dp, const Matrix& dq,
                              DivergenceId field, const FitOptions& opts, Exec exec) {
  const Matrix low = velocity_field(map.project(queries), map.project(dp), map.project(dq), field, opts, exec);
  return lifted_velocity(map, low);
}

double max_principal_angle(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw ShapeError("principal angles need bases in the same space");
  const Eigen::MatrixXd qa = orthonormal_basis(a);
  const Eigen::MatrixXd qb = orthonormal_basis(b);
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double smallest = svd.singularValues().minCoeff();
  return std::acos(std::clamp(smallest, -1.0, 1.0));
}

}  // namespace wgf
