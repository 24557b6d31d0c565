// Serial reference kernels vs their OpenMP versions.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "pdl/kernels.hpp"

namespace {

std::vector<double> random_buffer(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <bool Parallel>
void BM_GemmNN(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_buffer(n * n, 1), b = random_buffer(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      pdl::kernels::gemm_nn(a, b, c, n, n, n);
    } else {
      pdl::kernels::serial::gemm_nn(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_CosineMatrix(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t d = 32;
  const auto z = random_buffer(n * d, 3);
  for (auto _ : state) {
    auto s = Parallel ? pdl::kernels::cosine_similarity_matrix(z, n, d)
                      : pdl::kernels::serial::cosine_similarity_matrix(z, n, d);
    benchmark::DoNotOptimize(s.data());
  }
}

template <bool Parallel>
void BM_NearestNeighbors(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto dist = random_buffer(n * n, 4);
  for (auto _ : state) {
    auto nn = Parallel ? pdl::kernels::nearest_neighbors(dist, n, 8)
                       : pdl::kernels::serial::nearest_neighbors(dist, n, 8);
    benchmark::DoNotOptimize(nn.data());
  }
}

}  // namespace

BENCHMARK(BM_GemmNN<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_GemmNN<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_CosineMatrix<false>)->Arg(500)->Arg(2000);
BENCHMARK(BM_CosineMatrix<true>)->Arg(500)->Arg(2000);
BENCHMARK(BM_NearestNeighbors<false>)->Arg(500)->Arg(2000);
BENCHMARK(BM_NearestNeighbors<true>)->Arg(500)->Arg(2000);

BENCHMARK_MAIN();
