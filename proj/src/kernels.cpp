#include "pdl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pdl::kernels {

namespace {

// Shared per-row bodies. Both variants call these so the arithmetic order is
// identical and only the row scheduling differs.

inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t k, std::size_t n) {
  double* crow = c + i * n;
  std::fill(crow, crow + n, 0.0);
  const double* arow = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = b + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void gemm_nt_row(const double* a, const double* b, double* c, std::size_t i,
                        std::size_t k, std::size_t n) {
  const double* arow = a + i * k;
  for (std::size_t j = 0; j < n; ++j) {
    const double* brow = b + j * k;
    double acc = 0.0;
    for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
    c[i * n + j] = acc;
  }
}

// Row `p` of Aᵀ·B: sums over the m shared rows in ascending order.
inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t p,
                        std::size_t m, std::size_t k, std::size_t n) {
  double* crow = c + p * n;
  std::fill(crow, crow + n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double av = a[i * k + p];
    const double* brow = b + i * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline double row_norm(const double* x, std::size_t i, std::size_t d) {
  double acc = 0.0;
  for (std::size_t j = 0; j < d; ++j) acc += x[i * d + j] * x[i * d + j];
  return std::sqrt(acc);
}

inline void cosine_row(const double* z, const double* norms, double* out, std::size_t i,
                       std::size_t n, std::size_t d) {
  for (std::size_t j = 0; j < n; ++j) {
    const double denom = norms[i] * norms[j];
    if (denom == 0.0) {
      out[i * n + j] = 0.0;
      continue;
    }
    double acc = 0.0;
    for (std::size_t p = 0; p < d; ++p) acc += z[i * d + p] * z[j * d + p];
    out[i * n + j] = acc / denom;
  }
}

std::vector<std::size_t> ranked_row(const double* dist, std::size_t i, std::size_t n,
                                    std::size_t depth) {
  std::vector<std::size_t> order;
  order.reserve(n - 1);
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) order.push_back(j);
  }
  const double* row = dist + i * n;
  auto closer = [row](std::size_t l, std::size_t r) {
    if (row[l] != row[r]) return row[l] < row[r];
    return l < r;
  };
  const std::size_t keep = std::min(depth, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep),
                    order.end(), closer);
  order.resize(keep);
  return order;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_nn_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    gemm_nt_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(i), k, n);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::ptrdiff_t>(k);
#pragma omp parallel for schedule(static) if (m * k * n > 32768)
  for (std::ptrdiff_t p = 0; p < rows; ++p) {
    gemm_tn_row(a.data(), b.data(), c.data(), static_cast<std::size_t>(p), m, k, n);
  }
}

std::vector<double> row_norms(std::span<const double> x, std::size_t m, std::size_t d) {
  std::vector<double> out(m);
  const auto rows = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static) if (m * d > 32768)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    out[static_cast<std::size_t>(i)] = row_norm(x.data(), static_cast<std::size_t>(i), d);
  }
  return out;
}

std::vector<double> cosine_similarity_matrix(std::span<const double> z, std::size_t n,
                                             std::size_t d) {
  const auto norms = row_norms(z, n, d);
  std::vector<double> out(n * n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8) if (n * n * d > 32768)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    cosine_row(z.data(), norms.data(), out.data(), static_cast<std::size_t>(i), n, d);
  }
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const double> distances,
                                                        std::size_t n, std::size_t depth) {
  std::vector<std::vector<std::size_t>> out(n);
  const auto rows = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 8) if (n > 256)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    const auto row = static_cast<std::size_t>(i);
    out[row] = ranked_row(distances.data(), row, n, depth);
  }
  return out;
}

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_nn_row(a.data(), b.data(), c.data(), i, k, n);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) gemm_nt_row(a.data(), b.data(), c.data(), i, k, n);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) gemm_tn_row(a.data(), b.data(), c.data(), p, m, k, n);
}

std::vector<double> row_norms(std::span<const double> x, std::size_t m, std::size_t d) {
  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = row_norm(x.data(), i, d);
  return out;
}

std::vector<double> cosine_similarity_matrix(std::span<const double> z, std::size_t n,
                                             std::size_t d) {
  const auto norms = serial::row_norms(z, n, d);
  std::vector<double> out(n * n);
  for (std::size_t i = 0; i < n; ++i) cosine_row(z.data(), norms.data(), out.data(), i, n, d);
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const double> distances,
                                                        std::size_t n, std::size_t depth) {
  std::vector<std::vector<std::size_t>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ranked_row(distances.data(), i, n, depth);
  return out;
}

}  // namespace serial
}  // namespace pdl::kernels
