// Serial reference against the OpenMP path for the per-query kernels.
// The thread count comes from OMP_NUM_THREADS.

#include "wgf/baselines.hpp"
#include "wgf/datasets.hpp"
#include "wgf/kernel.hpp"
#include "wgf/local_linear.hpp"
#include "wgf/nw_field.hpp"
#include "wgf/score.hpp"

#include <benchmark/benchmark.h>

namespace {

using wgf::Exec;
using wgf::Matrix;

struct Pair {
  Matrix dp;
  Matrix dq;
};

const Pair& data(Eigen::Index n, Eigen::Index d) {
  static Pair cache;
  static Eigen::Index cn = -1;
  static Eigen::Index cd = -1;
  if (n != cn || d != cd) {
    cache.dp = wgf::gen_gaussian(Eigen::RowVectorXd::Zero(d), 1.0, n, 1);
    cache.dq = wgf::gen_gaussian(Eigen::RowVectorXd::Constant(d, -0.5), 0.8, n, 2);
    cn = n;
    cd = d;
  }
  return cache;
}

Exec exec_of(const benchmark::State& st) { return st.range(2) == 0 ? Exec::Serial : Exec::Parallel; }

void args(benchmark::internal::Benchmark* b) {
  for (long n : {500, 2000}) {
    for (long e : {0, 1}) b->Args({n, 2, e});
  }
  b->ArgNames({"n", "d", "parallel"})->Unit(benchmark::kMillisecond);
}

void BM_GaussKernel(benchmark::State& st) {
  const Pair& p = data(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(wgf::gauss_kernel(p.dq, p.dp, 0.7, exec_of(st)));
}

void BM_NadarayaWatson(benchmark::State& st) {
  const Pair& p = data(st.range(0), st.range(1));
  const wgf::ScoreOracle score = wgf::gaussian_score(Eigen::RowVectorXd::Zero(st.range(1)), 1.0);
  for (auto _ : st) benchmark::DoNotOptimize(wgf::nw_velocity(p.dq, score, 0.7, exec_of(st)));
}

void BM_KdeRatio(benchmark::State& st) {
  const Pair& p = data(st.range(0), st.range(1));
  for (auto _ : st) benchmark::DoNotOptimize(wgf::kde_ratio_gradient(p.dp, p.dq, p.dq, 0.7, exec_of(st)));
}

void BM_LocalLinearBkl(benchmark::State& st) {
  const Pair& p = data(st.range(0), st.range(1));
  wgf::FitOptions fit;
  fit.sigma = 0.7;
  for (auto _ : st) {
    benchmark::DoNotOptimize(wgf::velocity_field(p.dq, p.dp, p.dq, wgf::DivergenceId::BackwardKL, fit, exec_of(st)));
  }
}

void BM_LocalLinearFkl(benchmark::State& st) {
  const Pair& p = data(st.range(0), st.range(1));
  wgf::FitOptions fit;
  fit.sigma = 0.7;
  for (auto _ : st) {
    benchmark::DoNotOptimize(wgf::velocity_field(p.dq, p.dp, p.dq, wgf::DivergenceId::ForwardKL, fit, exec_of(st)));
  }
}

}  // namespace

BENCHMARK(BM_GaussKernel)->Apply(args);
BENCHMARK(BM_NadarayaWatson)->Apply(args);
BENCHMARK(BM_KdeRatio)->Apply(args);
BENCHMARK(BM_LocalLinearFkl)->Apply(args);
BENCHMARK(BM_LocalLinearBkl)->Apply(args);

BENCHMARK_MAIN();
