#include <omp.h>

#include <random>

#include "doctest.h"
#include "pdl/kernels.hpp"

namespace k = pdl::kernels;

namespace {

std::vector<double> random_buffer(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
  std::mt19937_64 rng(1);
  // Large enough to cross the parallel thresholds.
  const std::size_t m = 301, kk = 67, n = 129;
  const auto a = random_buffer(rng, m * kk);
  const auto b = random_buffer(rng, kk * n);
  const auto bt = random_buffer(rng, n * kk);
  const auto g = random_buffer(rng, m * n);

  for (int threads : {1, 2, 4}) {
    CAPTURE(threads);
    omp_set_num_threads(threads);
    std::vector<double> c1(m * n), c2(m * n);
    k::gemm_nn(a, b, c1, m, kk, n);
    k::serial::gemm_nn(a, b, c2, m, kk, n);
    CHECK(c1 == c2);

    k::gemm_nt(a, bt, c1, m, kk, n);
    k::serial::gemm_nt(a, bt, c2, m, kk, n);
    CHECK(c1 == c2);

    std::vector<double> t1(kk * n), t2(kk * n);
    k::gemm_tn(a, g, t1, m, kk, n);
    k::serial::gemm_tn(a, g, t2, m, kk, n);
    CHECK(t1 == t2);

    CHECK(k::row_norms(a, m, kk) == k::serial::row_norms(a, m, kk));
    const auto s1 = k::cosine_similarity_matrix(a, m, kk);
    CHECK(s1 == k::serial::cosine_similarity_matrix(a, m, kk));

    std::vector<double> dist(s1.size());
    for (std::size_t i = 0; i < s1.size(); ++i) dist[i] = 1.0 - s1[i];
    CHECK(k::nearest_neighbors(dist, m, 8) == k::serial::nearest_neighbors(dist, m, 8));
  }
  omp_set_num_threads(k::max_threads());
}

TEST_CASE("gemm against a naive triple loop") {
  std::mt19937_64 rng(2);
  const std::size_t m = 5, kk = 4, n = 3;
  const auto a = random_buffer(rng, m * kk), b = random_buffer(rng, kk * n);
  std::vector<double> c(m * n);
  k::gemm_nn(a, b, c, m, kk, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < kk; ++p) s += a[i * kk + p] * b[p * n + j];
      CHECK(c[i * n + j] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("cosine matrix treats zero rows as orthogonal to everything") {
  const std::vector<double> z{0, 0, 3, 4, 6, 8};
  const auto s = k::cosine_similarity_matrix(z, 3, 2);
  CHECK(s[0 * 3 + 1] == 0.0);
  CHECK(s[0 * 3 + 0] == 0.0);
  CHECK(s[1 * 3 + 2] == doctest::Approx(1.0));
}

TEST_CASE("nearest neighbours break ties by index and skip self") {
  // Every off-diagonal distance equal.
  const std::size_t n = 4;
  std::vector<double> d(n * n, 0.5);
  const auto nn = k::nearest_neighbors(d, n, 3);
  CHECK(nn[0] == std::vector<std::size_t>{1, 2, 3});
  CHECK(nn[2] == std::vector<std::size_t>{0, 1, 3});
  CHECK(k::nearest_neighbors(d, n, 2)[3] == std::vector<std::size_t>{0, 1});
}
