// Serial reference (workers = 1) against the OpenMP campaign runner on a reduced convergence study.

#include "bq/experiments.hpp"

#include <benchmark/benchmark.h>

namespace {

bq::ExperimentConfig bench_config() {
    return bq::parse_config(
        "n = 32\n"
        "dt = 1e-3\n"
        "T = 0.1\n"
        "n_samples = 8\n"
        "delta_list = 1e-3\n");
}

void BM_ConvergenceSerial(benchmark::State& state) {
    const bq::ExperimentConfig cfg = bench_config();
    for (auto _ : state) benchmark::DoNotOptimize(bq::run_convergence(cfg, 1));
    state.SetItemsProcessed(state.iterations() * cfg.n_samples * std::int64_t(cfg.eps_list.size()));
}

void BM_ConvergenceOpenMP(benchmark::State& state) {
    const bq::ExperimentConfig cfg = bench_config();
    const int workers = int(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(bq::run_convergence(cfg, workers));
    state.SetItemsProcessed(state.iterations() * cfg.n_samples * std::int64_t(cfg.eps_list.size()));
    state.counters["threads"] = workers;
}

}  // namespace

BENCHMARK(BM_ConvergenceSerial)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_ConvergenceOpenMP)
    ->Arg(2)
    ->Arg(4)
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();

BENCHMARK_MAIN();
