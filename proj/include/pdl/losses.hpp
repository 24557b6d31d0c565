#pragma once

#include <span>
#include <string>
#include <string_view>

#include "pdl/proxy_bank.hpp"
#include "pdl/tensor.hpp"

namespace pdl {

/// Scaled genuine (own-proxy) and impostor (other-proxy) similarities of a batch.
struct SimilarityPartition {
  Tensor s_gen;  // |B|
  Tensor s_imp;  // |B|·(C−1), (i, c) lexicographic
};

struct DistributionStats {
  Tensor mu_gen, var_gen, mu_imp, var_imp;
};

struct LossConfig {
  double tau = 1.0;
  double eps1 = 1e-6;
  double eps2 = 1e-6;
  double alpha = 0.2;
  double d_loss_eps = 1e-6;

  void validate() const;
};

enum class LossKind { pd, dloss, proxynca, triplet };

LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

/// S[i][c] = (z̃ᵢ · p̃_c) / τ.
Tensor scaled_similarities(const Tensor& z, const ProxyBank& bank, double tau);

SimilarityPartition partition_similarities(const Tensor& s, std::span<const int> labels);

/// Means and population variances of both sets; differentiable.
DistributionStats batch_stats(const SimilarityPartition& p);

/// −ln(μ_gen − μ_imp + ε₁) + ½·ln(σ²_gen + σ²_imp + ε₂), both logs clamped at
/// their ε.
Tensor pd_loss(const DistributionStats& stats, double eps1, double eps2);

Tensor pd_loss_from_batch(const Tensor& z, std::span<const int> labels, const ProxyBank& bank,
                          const LossConfig& cfg);

// Baselines.

/// Inverse decidability over all i<j cosine similarities of the batch.
/// Throws BatchCompositionError without at least one genuine and one impostor pair.
Tensor d_loss_batch(const Tensor& z, std::span<const int> labels, double eps);

/// Mean over the batch of −ln(exp(−d(z,p_y)) / Σ_{k≠y} exp(−d(z,p_k))), d the
/// squared Euclidean distance between normalized vectors.
Tensor proxy_nca_loss(const Tensor& z, std::span<const int> labels, const ProxyBank& bank);

/// Mean over every valid (a, p, n) of max(0, ‖a−p‖² − ‖a−n‖² + α).
Tensor triplet_loss_batch_all(const Tensor& z, std::span<const int> labels, double alpha);

/// Dispatches on `kind`; the bank is ignored by the pair-based losses.
Tensor compute_loss(LossKind kind, const Tensor& z, std::span<const int> labels,
                    const ProxyBank& bank, const LossConfig& cfg);

}  // namespace pdl
