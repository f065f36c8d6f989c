#include <benchmark/benchmark.h>

#include <random>

#include "distcurrents/exterior.hpp"
#include "distcurrents/multiindex.hpp"

namespace {

using distcurrents::Matrix;
using distcurrents::MultiIndex;

Matrix random_matrix(int rows, int cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix A(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) A(r, c) = dist(rng);
  return A;
}

void BM_det4(benchmark::State& state) {
  Matrix A = random_matrix(4, 4, 11);
  for (auto _ : state) benchmark::DoNotOptimize(distcurrents::det(A));
}
BENCHMARK(BM_det4);

void BM_minor_2of3x4(benchmark::State& state) {
  Matrix A = random_matrix(3, 4, 12);
  const MultiIndex cols({2, 4}, 4), rows({1, 3}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(distcurrents::minor(A, cols, rows));
}
BENCHMARK(BM_minor_2of3x4);

void BM_sigma(benchmark::State& state) {
  const MultiIndex a({2, 5, 6}, 6), b = a.complement();
  for (auto _ : state) benchmark::DoNotOptimize(distcurrents::sigma(a, b));
}
BENCHMARK(BM_sigma);

void BM_graph_nvector_3x3(benchmark::State& state) {
  Matrix A = random_matrix(3, 3, 13);
  for (auto _ : state) benchmark::DoNotOptimize(distcurrents::graph_nvector(A));
}
BENCHMARK(BM_graph_nvector_3x3);

}  // namespace

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  return 0;
}
