#include "pdhg/metrics.hpp"
#include "pdhg/problems.hpp"
#include "pdhg/prox.hpp"
#include "pdhg/solver.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using namespace pdhg;

Vec random_vec(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  Vec v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

void BM_SimplexProjection(benchmark::State& state) {
  const Vec v = random_vec(state.range(0), 1);
  for (auto _ : state) benchmark::DoNotOptimize(project_simplex(v));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_SimplexProjection)->RangeMultiplier(4)->Range(64, 16384)->Complexity();

void BM_GameIterations(benchmark::State& state) {
  const Mat k = random_game_matrix(state.range(0), state.range(0), GameGenerator::uniform, 7);
  ProblemInstance inst = matrix_game(k, 0.3, 1.0);
  inst.config.tol = 0.0;
  inst.config.max_iter = 100;
  for (auto _ : state) benchmark::DoNotOptimize(solve(inst.saddle, inst.config).iters);
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_GameIterations)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_BirkhoffGramSolve(benchmark::State& state) {
  const Index n = state.range(0);
  const Metric m = Metric::gram_shift(1.0, 0.1, LinearOperator::birkhoff(n), 1e-4);
  const Vec r = random_vec(2 * n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(m.solve(r));
}
BENCHMARK(BM_BirkhoffGramSolve)->Arg(50)->Arg(200);

void BM_EmdSgsSolve(benchmark::State& state) {
  const Index g = state.range(0);
  const auto k = LinearOperator::grid_divergence(g, g, 1.0);
  const SpMat ks = k.to_sparse();
  const SpMat q = SpMat(ks * SpMat(ks.transpose()));
  const Metric m = Metric::sgs(q, red_black_partition(g, g));
  const Vec r = random_vec(g * g, 3);
  for (auto _ : state) benchmark::DoNotOptimize(m.solve(r));
}
BENCHMARK(BM_EmdSgsSolve)->Arg(16)->Arg(64)->Arg(256);

void BM_ConditionCheck(benchmark::State& state) {
  const Mat k = random_game_matrix(state.range(0), state.range(0), GameGenerator::normal, 11);
  const auto op = LinearOperator::dense(k);
  auto [m1, m2] = build_diag_preconditioner(op, 1.0, 0.0, 1.0, 1.0);
  const Vec sigma = Vec::Zero(k.cols());
  for (auto _ : state) benchmark::DoNotOptimize(check_condition(m1, sigma, m2, op).s_hat);
}
BENCHMARK(BM_ConditionCheck)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
