#include <benchmark/benchmark.h>

#include "dialogrank/numerics.hpp"
#include "dialogrank/rng.hpp"

using namespace dialogrank;

namespace {

Matrix random_matrix(int r, int c, std::uint64_t seed) {
  Matrix m(r, c);
  Rng rng(seed);
  for (double& v : m.data) v = uniform_real(rng, -1.0, 1.0);
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Matrix a = random_matrix(n, n, 1);
  Matrix b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}

void BM_Sigmoid(benchmark::State& state) {
  Rng rng(3);
  std::vector<double> xs(1024);
  for (double& x : xs) x = uniform_real(rng, -30.0, 30.0);
  for (auto _ : state) {
    double acc = 0.0;
    for (double x : xs) acc += sigmoid(x);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(xs.size()));
}

}  // namespace

BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);
BENCHMARK(BM_Sigmoid);
