// Serial reference against the OpenMP kernels. Arg 0 = serial, 1 = parallel.

#include "tubescore/harness.hpp"
#include "tubescore/oracle.hpp"

#include <benchmark/benchmark.h>

#include <omp.h>

using namespace tubescore;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::Parallel : Execution::Serial; }

void label(benchmark::State& state) {
  state.SetLabel(state.range(0) ? "parallel x" + std::to_string(omp_get_max_threads()) : "serial");
}

void BM_ScoreGrid(benchmark::State& state) {
  const auto n = DensityFamily::normal();
  PerturbationModel m{NullModel::fixed(n, Vec::Zero(1)), n, ThetaDomain::interval(-3, 3), 0.1};
  const auto w = compress(sample(m, Vec::Constant(1, 1.0), 5000, 1), false);
  Vec inv_f(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) inv_f[i] = 1.0 / m.null.density(w.row(i));
  const auto grid = make_grid(m.domain, {}, 401).points;
  for (auto _ : state) benchmark::DoNotOptimize(raw_score(n, grid, w, inv_f, mode(state)));
  label(state);
}
BENCHMARK(BM_ScoreGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FieldReplicates(benchmark::State& state) {
  ScoreKernel k(NullModel::fixed(DensityFamily::normal(), Vec::Zero(1)), ThetaDomain::interval(-3, 3),
                KernelKind::Fixed);
  const auto pts = field_points(make_grid(k.domain(), {{Vec::Zero(1), SingularityClass::Flip}}, 401), k);
  const auto factor = factor_correlation(corr_matrix(k, pts));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_field_sup(factor.chol, 10000, 7, mode(state)));
  label(state);
}
BENCHMARK(BM_FieldReplicates)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_FieldNaive(benchmark::State& state) {
  ScoreKernel k(NullModel::fixed(DensityFamily::normal(), Vec::Zero(1)), ThetaDomain::interval(-3, 3),
                KernelKind::Fixed);
  const auto pts = field_points(make_grid(k.domain(), {{Vec::Zero(1), SingularityClass::Flip}}, 401), k);
  const auto factor = factor_correlation(corr_matrix(k, pts));
  for (auto _ : state) benchmark::DoNotOptimize(simulate_field_sup_naive(factor.chol, 10000, 7));
}
BENCHMARK(BM_FieldNaive)->Unit(benchmark::kMillisecond);

void BM_HarnessReplicates(benchmark::State& state) {
  ExperimentSpec s;
  s.model = 2;
  s.eta = 0.1;
  s.reps = 24;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(s, mode(state)));
  label(state);
}
BENCHMARK(BM_HarnessReplicates)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
