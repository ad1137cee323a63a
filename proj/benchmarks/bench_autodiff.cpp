#include <benchmark/benchmark.h>

#include "pointdep/autodiff.hpp"
#include "pointdep/rng.hpp"

namespace {

using pointdep::ad::Graph;
using pointdep::ad::Matrix;

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  auto rng = pointdep::make_rng(seed, "bench");
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// The fused concat-critic score matrix, forward and backward.
void BM_PairwiseReluHead(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int h = static_cast<int>(state.range(1));
  const Matrix a = random_matrix(n, h, 1), b = random_matrix(n, h, 2);
  const Matrix bias = random_matrix(1, h, 3), w = random_matrix(h, 1, 4);
  for (auto _ : state) {
    Graph g;
    auto s = pointdep::ad::pairwise_relu_head(g.parameter("a", a), g.parameter("b", b),
                                              g.parameter("bias", bias),
                                              g.parameter("w", w));
    auto loss = pointdep::ad::logsumexp(s);
    benchmark::DoNotOptimize(g.evaluate(loss));
    benchmark::DoNotOptimize(g.backward(loss));
  }
  state.SetItemsProcessed(state.iterations() * n * n * h);
}
BENCHMARK(BM_PairwiseReluHead)->Args({128, 512})->Args({64, 128});

void BM_MatmulChain(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Matrix x = random_matrix(n, 12, 5), w0 = random_matrix(12, 512, 6),
               w1 = random_matrix(512, 1, 7);
  for (auto _ : state) {
    Graph g;
    auto h = pointdep::ad::relu(pointdep::ad::matmul(g.constant(x), g.parameter("w0", w0)));
    auto loss = pointdep::ad::mean(pointdep::ad::matmul(h, g.parameter("w1", w1)));
    benchmark::DoNotOptimize(g.evaluate(loss));
    benchmark::DoNotOptimize(g.backward(loss));
  }
}
BENCHMARK(BM_MatmulChain)->Arg(128)->Arg(512);

}  // namespace
