#include "wgf/cli.hpp"

#include "wgf/baselines.hpp"
#include "wgf/datasets.hpp"
#include "wgf/flow.hpp"
#include "wgf/kernel.hpp"
#include "wgf/local_linear.hpp"
#include "wgf/nw_field.hpp"
#include "wgf/score.hpp"
#include "wgf/selection.hpp"
#include "wgf/subspace.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace wgf {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n == 0) return std::nan("");
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(text);
  while (std::getline(in, part, sep)) parts.push_back(part);
  return parts;
}

double to_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty()) throw UsageError(what + ": cannot parse '" + text + "' as a number");
  return v;
}

Eigen::RowVectorXd parse_vector(const std::string& text, const std::string& what) {
  const auto parts = split(text, ',');
  Eigen::RowVectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = to_double(parts[i], what);
  return v;
}

// "gauss:MEAN:SD" (MEAN is a scalar repeated over all dimensions or a
// comma list) or "mixture:w:mu:sd,...".
ScoreOracle parse_score(const std::string& text, Eigen::Index dim) {
  if (text.rfind("gauss:", 0) == 0) {
    const auto parts = split(text.substr(6), ':');
    if (parts.size() != 2) throw UsageError("--score gauss expects gauss:MEAN:SD");
    Eigen::RowVectorXd mean = parse_vector(parts[0], "--score mean");
    if (mean.size() == 1 && dim > 1) mean = Eigen::RowVectorXd::Constant(dim, mean(0));
    if (mean.size() != dim) throw ShapeError("--score mean has " + std::to_string(mean.size()) +
                                             " entries for " + std::to_string(dim) + "-dimensional data");
    return gaussian_score(mean, to_double(parts[1], "--score sd"));
  }
  if (text.rfind("mixture:", 0) == 0) {
    const MixtureSpec spec = parse_mixture(text.substr(8));
    if (spec.dim() != dim) throw ShapeError("--score mixture is one-dimensional; data has " + std::to_string(dim) +
                                            " columns");
    return mixture_score(spec);
  }
  throw UsageError("--score expects gauss:MEAN:SD or mixture:w:mu:sd,...");
}

// Shared local-linear fit flags.
struct FitFlags {
  double slope_ridge = FitOptions{}.slope_ridge;
  double clamp = FitOptions{}.clamp;
  int max_fit_iters = FitOptions{}.max_iters;
  double fit_tol = FitOptions{}.tol;
  std::string optimizer = "newton";

  void add(CLI::App* app) {
    app->add_option("--slope-ridge", slope_ridge, "Slope prior in pseudo-observations (0 disables)");
    app->add_option("--clamp", clamp, "Exponential conjugate is continued quadratically above this d");
    app->add_option("--max-fit-iters", max_fit_iters, "Iteration cap of each local fit");
    app->add_option("--fit-tol", fit_tol, "Gradient tolerance of each local fit");
    app->add_option("--optimizer", optimizer, "Local fit optimizer")->check(CLI::IsMember({"newton", "adam"}));
  }

  [[nodiscard]] FitOptions options(std::uint64_t seed) const {
    FitOptions f;
    f.slope_ridge = slope_ridge;
    f.clamp = clamp;
    f.max_iters = max_fit_iters;
    f.tol = fit_tol;
    f.optimizer = optimizer == "adam" ? Optimizer::Adam : Optimizer::Newton;
    f.seed = seed;
    f.validate();
    return f;
  }
};

struct Context {
  std::uint64_t seed = 0;
  Exec exec = Exec::Parallel;
};

struct Output {
  json records = json::array();
  json summary = json::object();
};

// Rows whose header ends in "label" split into features and integer labels.
LabeledSet split_labels(const CsvTable& t, const std::string& path) {
  if (t.header.empty() || t.header.back() != "label") {
    throw UsageError("'" + path + "' needs a final 'label' column");
  }
  if ((t.observed.array() == 0).any()) throw UsageError("'" + path + "' has missing entries");
  LabeledSet s;
  s.x = t.values.leftCols(t.values.cols() - 1);
  s.labels.reserve(static_cast<std::size_t>(t.values.rows()));
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    const double y = t.values(i, t.values.cols() - 1);
    if (y != std::round(y)) throw UsageError("'" + path + "' row " + std::to_string(i + 1) + ": label is not an integer");
    s.labels.push_back(static_cast<int>(y));
  }
  return s;
}

Matrix read_complete(const std::string& path) {
  const CsvTable t = read_csv(path);
  if ((t.observed.array() == 0).any()) throw UsageError("'" + path + "' has missing entries");
  return t.values;
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  std::string dist = "gauss";
  Eigen::Index n = 500;
  Eigen::Index dim = 1;
  std::string mean = "0";
  double sd = 1.0;
  std::string mixture = "1:-5:0.5,1:0:0.5,1:5:0.5";
  double noise = 0.1;
  std::string link = "sin";
  std::string centres = "0,0;3,3";
  std::string shift = "0,0";
  Eigen::Index per_class = 100;
  double missing = 0.0;
  std::string output;
};

void add_gen(CLI::App& app, GenArgs& a) {
  app.add_option("--dist", a.dist, "Distribution")
      ->check(CLI::IsMember({"gauss", "mixture", "sshape", "subspace5d", "blobs"}));
  app.add_option("--n", a.n, "Number of rows");
  app.add_option("--dim", a.dim, "Dimension (gauss)");
  app.add_option("--mean", a.mean, "Mean: scalar or comma list (gauss)");
  app.add_option("--sd", a.sd, "Standard deviation (gauss, blobs)");
  app.add_option("--mixture", a.mixture, "Components w:mu:sd,... (mixture)");
  app.add_option("--noise", a.noise, "Noise sd (sshape)");
  app.add_option("--link", a.link, "Link g in X1 = g(X2) + eps (subspace5d)")->check(CLI::IsMember({"sin", "cos"}));
  app.add_option("--centres", a.centres, "Class centres 'x,y;x,y' (blobs)");
  app.add_option("--shift", a.shift, "Shift added to every point (blobs)");
  app.add_option("--per-class", a.per_class, "Rows per class (blobs)");
  app.add_option("--missing", a.missing, "MCAR missing rate; missing cells are written empty");
  app.add_option("-o,--output", a.output, "Output CSV")->required();
}

void run_gen(const GenArgs& a, const Context& ctx, Output& out) {
  const std::uint64_t seed = derive_seed(ctx.seed, stream::kGenerate);
  Matrix x;
  std::vector<std::string> header;
  if (a.dist == "gauss") {
    if (a.dim < 1) throw UsageError("--dim must be at least 1");
    Eigen::RowVectorXd mean = parse_vector(a.mean, "--mean");
    if (mean.size() == 1) mean = Eigen::RowVectorXd::Constant(a.dim, mean(0));
    if (mean.size() != a.dim) throw ShapeError("--mean has " + std::to_string(mean.size()) + " entries for --dim " +
                                               std::to_string(a.dim));
    x = gen_gaussian(mean, a.sd, a.n, seed);
  } else if (a.dist == "mixture") {
    x = gen_mixture(parse_mixture(a.mixture), a.n, seed);
  } else if (a.dist == "sshape") {
    x = gen_s_shape(a.n, a.noise, seed);
  } else if (a.dist == "subspace5d") {
    x = gen_subspace5d(parse_link(a.link), a.n, seed);
  } else {
    std::vector<Eigen::RowVectorXd> centres;
    for (const auto& c : split(a.centres, ';')) centres.push_back(parse_vector(c, "--centres"));
    const LabeledSet s = gen_blobs(centres, a.sd, a.per_class, parse_vector(a.shift, "--shift"), seed);
    x.resize(s.rows(), s.dim() + 1);
    x.leftCols(s.dim()) = s.x;
    for (Eigen::Index i = 0; i < s.rows(); ++i) x(i, s.dim()) = s.labels[static_cast<std::size_t>(i)];
    header = default_header(s.dim());
    header.push_back("label");
  }
  if (header.empty()) header = default_header(x.cols());
  std::optional<Mask> mask;
  if (a.missing > 0.0) {
    if (a.dist == "blobs") throw UsageError("--missing is not supported with labelled output");
    mask = mcar_mask(x.rows(), x.cols(), a.missing, derive_seed(ctx.seed, stream::kMask));
  }
  write_csv(a.output, header, x, mask ? &*mask : nullptr);
  out.summary["rows"] = x.rows();
  out.summary["columns"] = x.cols();
  out.summary["missing_entries"] = mask ? static_cast<Eigen::Index>((mask->array() == 0).count()) : 0;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
  std::string p;
  std::string q;
  std::string queries;
  std::string div = "bkl";
  std::string method = "ll";
  std::string score;
  std::string sigma = "median";
  std::string output;
  FitFlags fit;
};

void add_estimate(CLI::App& app, EstimateArgs& a) {
  app.add_option("--p", a.p, "Target samples Dp (CSV)")->check(CLI::ExistingFile);
  app.add_option("--q", a.q, "Particle samples Dq (CSV)")->required()->check(CLI::ExistingFile);
  app.add_option("--queries", a.queries, "Query points (CSV); defaults to Dq")->check(CLI::ExistingFile);
  app.add_option("--div", a.div, "Field divergence: fkl, bkl, pearson, neyman");
  app.add_option("--method", a.method, "ll, nw or kde")->check(CLI::IsMember({"ll", "nw", "kde"}));
  app.add_option("--score", a.score, "Closed-form target score for nw: gauss:MEAN:SD or mixture:...");
  app.add_option("--sigma", a.sigma, "Bandwidth: number, median or cv");
  app.add_option("-o,--output", a.output, "Field CSV, one row per query: coordinates, velocity (w), b, objective");
  a.fit.add(&app);
}

void run_estimate(const EstimateArgs& a, const Context& ctx, Output& out) {
  const DivergenceId field = parse_divergence(a.div);
  if (!is_field_divergence(field)) throw UsageError("--div must be one of fkl, bkl, pearson, neyman");
  const SigmaPolicy policy = SigmaPolicy::parse(a.sigma);
  const Matrix dq = read_complete(a.q);
  require_nonempty(dq, "--q");
  const bool needs_p = a.method != "nw";
  if (needs_p && a.p.empty()) throw UsageError("--p is required for method " + a.method);
  const Matrix dp = a.p.empty() ? Matrix() : read_complete(a.p);
  if (!a.p.empty()) require_same_dim(dp, dq, "--p vs --q");
  const Matrix queries = a.queries.empty() ? dq : read_complete(a.queries);
  require_same_dim(queries, dq, "--queries vs --q");
  std::optional<ScoreOracle> score;
  if (a.method == "nw") {
    if (a.score.empty()) throw UsageError("method nw needs --score");
    if (field != DivergenceId::BackwardKL) throw UsageError("method nw estimates the bkl field only");
    score = parse_score(a.score, dq.cols());
  }
  FitOptions fit = a.fit.options(ctx.seed);
  double sigma = 0.0;
  if (needs_p) {
    sigma = resolve_sigma(policy, dp, dq, field, ctx.seed, fit, ctx.exec);
  } else {
    if (policy.kind == SigmaPolicy::Kind::CV) throw UsageError("--sigma cv needs --p (use median or a number with nw)");
    sigma = policy.kind == SigmaPolicy::Kind::Fixed ? policy.value : median_bandwidth(dq);
  }
  fit.sigma = sigma;
  Matrix v;
  std::vector<LocalFit> fits;
  if (a.method == "ll") {
    fits = fit_field(queries, dp, dq, field, fit, ctx.exec);
    v.resize(queries.rows(), queries.cols());
    for (Eigen::Index j = 0; j < queries.rows(); ++j) v.row(j) = fits[static_cast<std::size_t>(j)].w;
  } else if (a.method == "nw") {
    v = nw_velocity(dq, *score, queries, sigma, ctx.exec);
  } else {
    if (field != DivergenceId::BackwardKL) throw UsageError("method kde estimates the bkl field only");
    v = kde_ratio_gradient(dp, dq, queries, sigma, ctx.exec);
  }
  if (!a.output.empty()) {
    // Query coordinates, then the velocity (w for ll), then b and the
    // local objective for ll.
    const Eigen::Index d = v.cols();
    const Eigen::Index extra = fits.empty() ? 0 : 2;
    Matrix table(v.rows(), 2 * d + extra);
    table.leftCols(d) = queries;
    table.middleCols(d, d) = v;
    std::vector<std::string> header = default_header(d);
    for (const auto& h : default_header(d, fits.empty() ? "v" : "w")) header.push_back(h);
    if (!fits.empty()) {
      for (Eigen::Index j = 0; j < v.rows(); ++j) {
        table(j, 2 * d) = fits[static_cast<std::size_t>(j)].b;
        table(j, 2 * d + 1) = fits[static_cast<std::size_t>(j)].objective_value;
      }
      header.push_back("b");
      header.push_back("objective");
    }
    write_csv(a.output, header, table);
  }
  out.summary["sigma"] = sigma;
  out.summary["queries"] = queries.rows();
  out.summary["mean_speed"] = number(v.rowwise().norm().mean());
  if (needs_p) {
    out.summary["bound_of"] = std::string(to_string(mirror_of(field)));
    out.summary["heldout_bound"] = number(heldout_criterion(dp, dq, field, sigma, 5, ctx.seed, fit, ctx.exec));
  }
}

// ---- flow ------------------------------------------------------------------

struct FlowArgs {
  std::string p;
  std::string q;
  std::string output;
  std::string div = "bkl";
  std::string method = "ll";
  std::string score;
  int iters = 20;
  double eta = 0.1;
  std::string sigma = "median";
  int cv_every = 10;
  bool monitor = true;
  std::string monitor_sigma = "median";
  int snapshot_every = 0;
  std::string trajectory;
  Eigen::Index subspace = 0;
  int subspace_every = 10;
  std::string map;
  FitFlags fit;
};

void add_flow(CLI::App& app, FlowArgs& a) {
  app.add_option("--p", a.p, "Target samples Dp (CSV)")->required()->check(CLI::ExistingFile);
  app.add_option("--q", a.q, "Initial particles (CSV)")->required()->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "Final particles (CSV)");
  app.add_option("--div", a.div, "Field divergence: fkl, bkl, pearson, neyman");
  app.add_option("--method", a.method, "ll or nw")->check(CLI::IsMember({"ll", "nw"}));
  app.add_option("--score", a.score, "Closed-form target score for nw: gauss:MEAN:SD or mixture:...");
  app.add_option("--iters", a.iters, "Euler steps");
  app.add_option("--eta", a.eta, "Step size");
  app.add_option("--sigma", a.sigma, "Field bandwidth: number, median or cv");
  app.add_option("--cv-every", a.cv_every, "Refresh a CV bandwidth every this many steps");
  app.add_option("--monitor", a.monitor, "Record held-out KL[particles, target] (true/false)");
  app.add_option("--monitor-sigma", a.monitor_sigma, "Monitor bandwidth: number, median or cv");
  app.add_option("--snapshot-every", a.snapshot_every, "Keep particles every this many steps (0: none)");
  app.add_option("--trajectory", a.trajectory, "Trajectory CSV (t, particle, coordinates)");
  app.add_option("--subspace", a.subspace, "Feature-space dimension m (0: full space)");
  app.add_option("--subspace-every", a.subspace_every, "Refresh the feature map every this many steps");
  app.add_option("--map", a.map, "Final feature map S (CSV, d rows)");
  a.fit.add(&app);
}

void run_flow_cmd(const FlowArgs& a, const Context& ctx, Output& out) {
  const Matrix dp = read_complete(a.p);
  const Matrix q0 = read_complete(a.q);
  require_nonempty(dp, "--p");
  require_nonempty(q0, "--q");
  require_same_dim(dp, q0, "--p vs --q");
  FlowOptions o;
  o.field = parse_divergence(a.div);
  o.method = parse_method(a.method);
  o.iters = a.iters;
  o.eta = a.eta;
  o.sigma = SigmaPolicy::parse(a.sigma);
  o.cv_every = a.cv_every;
  o.monitor = a.monitor;
  o.monitor_sigma = SigmaPolicy::parse(a.monitor_sigma);
  o.snapshot_every = a.snapshot_every;
  if (!a.trajectory.empty() && o.snapshot_every == 0) o.snapshot_every = 1;
  o.subspace_dim = a.subspace;
  o.subspace_every = a.subspace_every;
  o.fit = a.fit.options(ctx.seed);
  o.subspace.fit = o.fit;
  o.subspace.seed = derive_seed(ctx.seed, stream::kSubspace);
  o.subspace.exec = ctx.exec;
  o.seed = ctx.seed;
  o.exec = ctx.exec;
  if (o.method == FieldMethod::NadarayaWatson) {
    if (a.score.empty()) throw UsageError("method nw needs --score");
    o.score = parse_score(a.score, dp.cols());
  }
  if (!a.map.empty() && a.subspace == 0) throw UsageError("--map needs --subspace m");
  o.validate(dp.cols());

  FeatureMap map;
  const FlowState st = run_flow(dp, q0, o, a.subspace > 0 ? &map : nullptr);

  if (!a.output.empty()) write_csv(a.output, default_header(st.particles.cols()), st.particles);
  if (!a.trajectory.empty()) {
    const Eigen::Index d = st.particles.cols();
    Eigen::Index rows = 0;
    for (const auto& s : st.trajectory) rows += s.particles.rows();
    Matrix traj(rows, d + 2);
    Eigen::Index r = 0;
    for (const auto& s : st.trajectory) {
      for (Eigen::Index i = 0; i < s.particles.rows(); ++i, ++r) {
        traj(r, 0) = s.t;
        traj(r, 1) = static_cast<double>(i);
        traj.row(r).tail(d) = s.particles.row(i);
      }
    }
    std::vector<std::string> header{"t", "particle"};
    for (const auto& h : default_header(d)) header.push_back(h);
    write_csv(a.trajectory, header, traj);
  }
  if (!a.map.empty()) write_csv(a.map, default_header(map.m(), "s"), map.s);

  for (const auto& rec : st.history) {
    out.records.push_back({{"t", rec.t}, {"monitor", number(rec.value)}, {"sigma", number(rec.sigma)}});
  }
  if (!st.history.empty()) {
    out.summary["initial_monitor"] = number(st.history.front().value);
    out.summary["final_monitor"] = number(st.history.back().value);
  }
  out.summary["iterations"] = st.t;
  out.summary["warnings"] = st.warnings;
}

// ---- impute ----------------------------------------------------------------

struct ImputeArgs {
  std::string input;
  std::string output;
  std::string truth;
  std::string div = "fkl";
  int iters = 100;
  double eta = 0.1;
  std::string sigma = "cv";
  int cv_every = 10;
  double mask_scale = 1.0;
  FitFlags fit;
};

void add_impute(CLI::App& app, ImputeArgs& a) {
  app.add_option("--input", a.input, "Data with empty cells for missing entries (CSV)")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "Imputed data (CSV)");
  app.add_option("--truth", a.truth, "Complete data for evaluation only (CSV)")->check(CLI::ExistingFile);
  app.add_option("--div", a.div, "Field divergence: fkl, bkl, pearson, neyman");
  app.add_option("--iters", a.iters, "Euler steps");
  app.add_option("--eta", a.eta, "Step size");
  app.add_option("--sigma", a.sigma, "Bandwidth: number, median or cv");
  app.add_option("--cv-every", a.cv_every, "Refresh a CV bandwidth every this many steps");
  app.add_option("--mask-scale", a.mask_scale, "Scale of the mask columns in the joint and product samples");
  a.fit.add(&app);
}

void run_impute_cmd(const ImputeArgs& a, const Context& ctx, Output& out) {
  const CsvTable t = read_csv(a.input);
  std::optional<Matrix> truth;
  if (!a.truth.empty()) {
    truth = read_complete(a.truth);
    if (truth->rows() != t.values.rows() || truth->cols() != t.values.cols()) {
      throw ShapeError("--truth shape does not match --input");
    }
  }
  ImputeOptions o;
  o.field = parse_divergence(a.div);
  o.iters = a.iters;
  o.eta = a.eta;
  o.sigma = SigmaPolicy::parse(a.sigma);
  o.cv_every = a.cv_every;
  o.mask_scale = a.mask_scale;
  o.fit = a.fit.options(ctx.seed);
  o.seed = ctx.seed;
  o.exec = ctx.exec;
  const ImputeResult r = impute(t.values, t.observed, o);
  if (!a.output.empty()) write_csv(a.output, t.header, r.imputed);
  for (const auto& rec : r.records) {
    out.records.push_back({{"t", rec.t}, {"sigma", number(rec.sigma)}, {"mean_step", number(rec.mean_step)}});
  }
  const auto missing = static_cast<Eigen::Index>((t.observed.array() == 0).count());
  out.summary["missing_entries"] = missing;
  if (truth && missing > 0) {
    const Matrix baseline = impute_column_mean(t.values, t.observed);
    double se = 0.0;
    double se_mean = 0.0;
    for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
      for (Eigen::Index c = 0; c < t.values.cols(); ++c) {
        if (t.observed(i, c) != 0) continue;
        se += std::pow(r.imputed(i, c) - (*truth)(i, c), 2);
        se_mean += std::pow(baseline(i, c) - (*truth)(i, c), 2);
      }
    }
    out.summary["rmse"] = number(std::sqrt(se / static_cast<double>(missing)));
    out.summary["rmse_column_mean"] = number(std::sqrt(se_mean / static_cast<double>(missing)));
  }
}

// ---- adapt -----------------------------------------------------------------

struct AdaptArgs {
  std::string source;
  std::string target;
  std::string output;
  int iters = 50;
  double eta = 0.1;
  double label_scale = 1.0;
  std::string sigma = "median";
  FitFlags fit;
};

void add_adapt(CLI::App& app, AdaptArgs& a) {
  app.add_option("--source", a.source, "Labelled source (CSV, final column 'label')")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("--target", a.target, "Target features (CSV); a final 'label' column is used for evaluation only")
      ->required()
      ->check(CLI::ExistingFile);
  app.add_option("-o,--output", a.output, "Transported source with labels (CSV)");
  app.add_option("--iters", a.iters, "Euler steps");
  app.add_option("--eta", a.eta, "Step size");
  app.add_option("--label-scale", a.label_scale, "Scale of the one-hot label columns");
  app.add_option("--sigma", a.sigma, "Bandwidth: number, median or cv");
  a.fit.add(&app);
}

void run_adapt_cmd(const AdaptArgs& a, const Context& ctx, Output& out) {
  const CsvTable st = read_csv(a.source);
  const LabeledSet source = split_labels(st, a.source);
  const CsvTable tt = read_csv(a.target);
  Matrix target;
  std::optional<std::vector<int>> target_labels;
  if (!tt.header.empty() && tt.header.back() == "label") {
    LabeledSet t = split_labels(tt, a.target);
    target = std::move(t.x);
    target_labels = std::move(t.labels);
  } else {
    if ((tt.observed.array() == 0).any()) throw UsageError("'" + a.target + "' has missing entries");
    target = tt.values;
  }
  AdaptOptions o;
  o.iters = a.iters;
  o.eta = a.eta;
  o.label_scale = a.label_scale;
  o.sigma = SigmaPolicy::parse(a.sigma);
  o.fit = a.fit.options(ctx.seed);
  o.seed = ctx.seed;
  o.exec = ctx.exec;
  const AdaptResult r = adapt(source, target, o, target_labels ? &*target_labels : nullptr);
  if (!a.output.empty()) {
    Matrix x(r.transported.rows(), r.transported.dim() + 1);
    x.leftCols(r.transported.dim()) = r.transported.x;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      x(i, r.transported.dim()) = r.transported.labels[static_cast<std::size_t>(i)];
    }
    write_csv(a.output, st.header, x);
  }
  for (const auto& rec : r.records) {
    json j{{"t", rec.t}, {"sigma", number(rec.sigma)}};
    if (rec.accuracy >= 0.0) j["accuracy"] = rec.accuracy;
    out.records.push_back(j);
  }
  if (target_labels) {
    out.summary["accuracy_before"] = r.accuracy_before;
    out.summary["accuracy_after"] = r.accuracy_after;
  }
}

// ---- select ----------------------------------------------------------------

struct SelectArgs {
  std::string p;
  std::string q;
  std::string div = "bkl";
  int folds = 5;
  std::vector<double> candidates;
  FitFlags fit;
};

void add_select(CLI::App& app, SelectArgs& a) {
  app.add_option("--p", a.p, "Target samples Dp (CSV)")->required()->check(CLI::ExistingFile);
  app.add_option("--q", a.q, "Particle samples Dq (CSV)")->required()->check(CLI::ExistingFile);
  app.add_option("--div", a.div, "Field divergence: fkl, bkl, pearson, neyman");
  app.add_option("--folds", a.folds, "Cross-validation folds");
  app.add_option("--candidates", a.candidates, "Candidate bandwidths (default: median x {1/8, 1/4, 1/2, 1, 2})")
      ->delimiter(',');
  a.fit.add(&app);
}

void run_select_cmd(const SelectArgs& a, const Context& ctx, Output& out) {
  const DivergenceId field = parse_divergence(a.div);
  if (!is_field_divergence(field)) throw UsageError("--div must be one of fkl, bkl, pearson, neyman");
  const Matrix dp = read_complete(a.p);
  const Matrix dq = read_complete(a.q);
  require_nonempty(dp, "--p");
  require_nonempty(dq, "--q");
  require_same_dim(dp, dq, "--p vs --q");
  const std::vector<double> cands = a.candidates.empty() ? default_candidates(dp, dq) : a.candidates;
  const SelectionReport r =
      select_bandwidth(dp, dq, field, cands, a.folds, ctx.seed, a.fit.options(ctx.seed), ctx.exec);
  for (std::size_t i = 0; i < r.candidates.size(); ++i) {
    out.records.push_back({{"sigma", r.candidates[i]}, {"criterion", number(r.criterion[i])}});
  }
  out.summary["chosen"] = r.chosen;
  out.summary["folds"] = r.folds;
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  std::vector<std::string> scenarios{"gauss", "mixture"};
  Eigen::Index n = 1000;
  Eigen::Index queries = 200;
  int seeds = 3;
  std::string sigma = "cv";
  std::string output;
};

void add_bench(CLI::App& app, BenchArgs& a) {
  app.add_option("--scenario", a.scenarios, "Scenarios: gauss, mixture")
      ->delimiter(',')
      ->check(CLI::IsMember({"gauss", "mixture"}));
  app.add_option("--n", a.n, "Samples per distribution");
  app.add_option("--queries", a.queries, "Query points drawn from q");
  app.add_option("--seeds", a.seeds, "Repetitions");
  app.add_option("--sigma", a.sigma, "Bandwidth shared by all methods: number, median or cv");
  app.add_option("-o,--output", a.output, "Error table (CSV)");
}

// Named benchmark pairs: p (target) and q (particles) as Gaussian mixtures.
std::pair<MixtureSpec, MixtureSpec> bench_pair(const std::string& name) {
  const auto one = [](std::vector<double> mus, double sd) {
    MixtureSpec m;
    for (double mu : mus) {
      m.weights.push_back(1.0 / static_cast<double>(mus.size()));
      m.means.push_back(Eigen::RowVectorXd::Constant(1, mu));
      m.sds.push_back(sd);
    }
    return m;
  };
  if (name == "gauss") return {one({0.0}, 1.0), one({-1.0}, 0.25)};
  return {one({-5.0, 0.0, 5.0}, 0.5), one({-5.0, 0.0, 5.0}, 1.0)};
}

void run_bench_cmd(const BenchArgs& a, const Context& ctx, Output& out) {
  if (a.seeds < 1) throw UsageError("--seeds must be at least 1");
  if (a.n < 2 || a.queries < 1) throw UsageError("--n must be at least 2 and --queries at least 1");
  const SigmaPolicy policy = SigmaPolicy::parse(a.sigma);
  std::vector<std::vector<double>> table;
  std::vector<std::string> labels;
  json summary = json::object();
  const char* methods[] = {"ll", "nw", "kde"};
  for (const auto& name : a.scenarios) {
    const auto [ps, qs] = bench_pair(name);
    const ScoreOracle sp = mixture_score(ps);
    const ScoreOracle sq = mixture_score(qs);
    std::vector<double> per_method[3];
    for (int s = 0; s < a.seeds; ++s) {
      const std::uint64_t base = derive_seed(derive_seed(ctx.seed, stream::kGenerate), static_cast<std::uint64_t>(s));
      const Matrix dp = gen_mixture(ps, a.n, derive_seed(base, 0));
      const Matrix dq = gen_mixture(qs, a.n, derive_seed(base, 1));
      const Matrix queries = gen_mixture(qs, a.queries, derive_seed(base, 2));
      const Matrix truth = sp.evaluate(queries) - sq.evaluate(queries);
      FitOptions fit;
      fit.seed = ctx.seed;
      fit.sigma = resolve_sigma(policy, dp, dq, DivergenceId::BackwardKL, base, fit, ctx.exec);
      const Matrix est[3] = {velocity_field(queries, dp, dq, DivergenceId::BackwardKL, fit, ctx.exec),
                             nw_velocity(dq, sp, queries, fit.sigma, ctx.exec),
                             kde_ratio_gradient(dp, dq, queries, fit.sigma, ctx.exec)};
      for (int m = 0; m < 3; ++m) {
        const Eigen::VectorXd err = (est[m] - truth).rowwise().norm();
        std::vector<double> e(err.data(), err.data() + err.size());
        const double med = median_of(e);
        per_method[m].push_back(med);
        table.push_back({static_cast<double>(s), static_cast<double>(m), fit.sigma, med, err.mean()});
        labels.push_back(name);
        out.records.push_back({{"scenario", name},
                               {"seed", s},
                               {"method", methods[m]},
                               {"sigma", fit.sigma},
                               {"median_error", number(med)},
                               {"mean_error", number(err.mean())}});
      }
    }
    json js = json::object();
    for (int m = 0; m < 3; ++m) js[methods[m]] = number(median_of(per_method[m]));
    summary[name] = js;
  }
  if (!a.output.empty()) {
    std::ofstream f(a.output);
    if (!f) throw std::runtime_error("cannot open '" + a.output + "' for writing");
    f.precision(17);
    f << "scenario,seed,method,sigma,median_error,mean_error\n";
    for (std::size_t i = 0; i < table.size(); ++i) {
      const auto& row = table[i];
      f << labels[i] << ',' << static_cast<int>(row[0]) << ',' << methods[static_cast<int>(row[1])] << ',' << row[2]
        << ',' << row[3] << ',' << row[4] << '\n';
    }
    if (!f) throw std::runtime_error("failed writing '" + a.output + "'");
  }
  out.summary["median_of_seed_medians"] = summary;
}

// ---- config ----------------------------------------------------------------

// Reads "key = value" lines ('#' starts a comment) as "--key=value" tokens.
std::vector<std::string> config_tokens(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  int lineno = 0;
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config '" + path + "' line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw UsageError("config '" + path + "' line " + std::to_string(lineno) + ": invalid key");
    }
    tokens.push_back("--" + key + "=" + value);
  }
  return tokens;
}

std::string config_path(const std::vector<std::string>& args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  return path;
}

json echo_options(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty() || opt->get_lnames().front() == "help") continue;
    const std::string& name = opt->get_lnames().front();
    const auto& res = opt->reduced_results();
    if (!res.empty()) {
      j[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Particle flows for f-divergence minimization with local-linear velocity fields", "wgf"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast)->always_capture_default();
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  int threads = 0;
  std::string config;
  std::string metrics;
  app.add_option("--seed", seed, "Global seed; every random stream derives from it");
  app.add_option("--threads", threads, "Cap on worker threads (default: all cores)");
  app.add_option("--config", config, "key = value file; command-line flags win");
  app.add_option("--metrics", metrics, "Metrics JSON path (default: standard output)");

  GenArgs gen;
  EstimateArgs est;
  FlowArgs flow;
  ImputeArgs imp;
  AdaptArgs ad;
  SelectArgs sel;
  BenchArgs bench;
  struct Command {
    CLI::App* app;
    std::function<void(const Context&, Output&)> run;
  };
  std::vector<Command> commands;
  const auto add = [&](const char* name, const char* help, auto& args, auto adder, auto runner) {
    CLI::App* sub = app.add_subcommand(name, help);
    adder(*sub, args);
    commands.push_back({sub, [&args, runner](const Context& c, Output& o) { runner(args, c, o); }});
  };
  add("gen", "Generate a synthetic data set", gen, add_gen, run_gen);
  add("estimate", "Estimate the velocity field at query points", est, add_estimate, run_estimate);
  add("flow", "Run a particle flow toward target samples", flow, add_flow, run_flow_cmd);
  add("impute", "Fill missing entries by a mutual-information flow", imp, add_impute, run_impute_cmd);
  add("adapt", "Transport labelled source features toward a target domain", ad, add_adapt, run_adapt_cmd);
  add("select", "Cross-validate the kernel bandwidth", sel, add_select, run_select_cmd);
  add("bench", "Compare LL, NW and KDE field errors on named scenarios", bench, add_bench, run_bench_cmd);

  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  try {
    // Config entries go right after the subcommand name so that later
    // command-line flags override them.
    const std::string cfg = config_path(args);
    if (!cfg.empty()) {
      const std::vector<std::string> extra = config_tokens(cfg);
      auto pos = std::find_if(args.begin(), args.end(), [&](const std::string& a) {
        return std::any_of(commands.begin(), commands.end(), [&](const Command& c) { return c.app->get_name() == a; });
      });
      if (pos != args.end()) args.insert(pos + 1, extra.begin(), extra.end());
    }
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << " (see --help)\n";
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  const Command* chosen = nullptr;
  for (const auto& c : commands) {
    if (c.app->parsed()) chosen = &c;
  }
  if (chosen == nullptr) {
    err << "error: no subcommand given (see --help)\n";
    return kExitUsage;
  }

  try {
    if (threads < 0) throw UsageError("--threads must be nonnegative");
    if (threads > 0) set_num_threads(threads);
    Context ctx;
    ctx.seed = seed;
    ctx.exec = Exec::Parallel;
    Output o;
    const auto start = Clock::now();
    chosen->run(ctx, o);
    o.summary["elapsed_s"] = seconds_since(start);
    json config_echo = echo_options(chosen->app);
    config_echo["threads"] = threads > 0 ? threads : max_threads();
    const json doc{{"command", chosen->app->get_name()},
                   {"config", config_echo},
                   {"seed", seed},
                   {"records", o.records},
                   {"summary", o.summary}};
    if (metrics.empty()) {
      out << doc.dump(2) << "\n";
    } else {
      std::ofstream f(metrics);
      if (!f) throw std::runtime_error("cannot open '" + metrics + "' for writing");
      f << doc.dump(2) << "\n";
      if (!f) throw std::runtime_error("failed writing '" + metrics + "'");
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace wgf
