#include <benchmark/benchmark.h>

#include "pointdep/experiments.hpp"

namespace {

using namespace pointdep;

// A short staircase cell: one estimator, one seed. Reported time divided by
// the iteration count is the per-step cost that dominates the benchmark runs.
void BM_StaircaseStep(benchmark::State& state, const char* estimator) {
  BenchmarkConfig cfg;
  cfg.estimators = {estimator};
  cfg.seeds = {0};
  cfg.iterations = 20;
  cfg.step_length = 20;
  cfg.window = 10;
  for (auto _ : state) benchmark::DoNotOptimize(run_staircase(cfg));
  state.SetItemsProcessed(state.iterations() * cfg.iterations);
}
BENCHMARK_CAPTURE(BM_StaircaseStep, pc, "pc")->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_StaircaseStep, cpc, "cpc")->Unit(benchmark::kMillisecond);

void BM_RetrievalEpoch(benchmark::State& state) {
  auto data = make_crossmodal_dataset(1000, 100, 0.9, 0);
  PairSet train = select_pairs(data.audio, data.text, data.tokens, data.train);
  RetrievalConfig cfg;
  cfg.epochs = 1;
  for (auto _ : state) benchmark::DoNotOptimize(train_retrieval_critic(train, cfg));
}
BENCHMARK(BM_RetrievalEpoch)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
