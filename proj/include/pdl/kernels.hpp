#pragma once

// Dense row-major kernels used by the autodiff ops and the evaluation code.
//
// The functions in `pdl::kernels` are OpenMP-parallel over output rows. Each
// output element is accumulated by exactly one thread in a fixed order, so
// results are bitwise identical for any thread count. `pdl::kernels::serial`
// holds the straightforward single-threaded versions; tests compare the two
// and bench/ times them against each other.

#include <cstddef>
#include <span>
#include <vector>

namespace pdl::kernels {

/// C[m×n] = A[m×k] · B[k×n]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

/// C[m×n] = A[m×k] · B[n×k]ᵀ
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

/// C[k×n] = A[m×k]ᵀ · B[m×n]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);

/// Euclidean norm of every row of X[m×d].
std::vector<double> row_norms(std::span<const double> x, std::size_t m, std::size_t d);

/// Returns the n×n matrix of cosine similarities between rows of Z[n×d].
/// Zero rows get similarity 0 with everything.
std::vector<double> cosine_similarity_matrix(std::span<const double> z, std::size_t n,
                                             std::size_t d);

/// For every row i of the n×n distance matrix, the indices j ≠ i sorted by
/// ascending distance, ties broken by ascending j, truncated to `depth`.
std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const double> distances,
                                                        std::size_t n, std::size_t depth);

/// Number of threads the parallel kernels will use.
int max_threads();

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c,
             std::size_t m, std::size_t k, std::size_t n);
std::vector<double> row_norms(std::span<const double> x, std::size_t m, std::size_t d);
std::vector<double> cosine_similarity_matrix(std::span<const double> z, std::size_t n,
                                             std::size_t d);
std::vector<std::vector<std::size_t>> nearest_neighbors(std::span<const double> distances,
                                                        std::size_t n, std::size_t depth);

}  // namespace serial
}  // namespace pdl::kernels
