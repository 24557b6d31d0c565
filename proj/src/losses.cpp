#include "pdl/losses.hpp"

#include <fmt/format.h>

#include <set>

#include "pdl/error.hpp"

namespace pdl {

namespace {

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t num_classes,
                  std::string_view op) {
  if (labels.size() != rows) {
    throw DimensionError(fmt::format("{}: {} labels for {} rows", op, labels.size(), rows));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw LabelError(fmt::format("{}: label {} at index {} is outside [0, {})", op, labels[i],
                                   i, num_classes));
    }
  }
}

void check_bank_dim(const Tensor& z, const ProxyBank& bank, std::string_view op) {
  if (z.rank() != 2 || z.cols() != bank.dim()) {
    throw DimensionError(fmt::format("{}: embeddings {} do not match proxies {}", op,
                                     shape_to_string(z.shape()),
                                     shape_to_string(bank.proxies.shape())));
  }
}

std::string composition(std::span<const int> labels) {
  const std::set<int> distinct(labels.begin(), labels.end());
  return fmt::format("batch of {} samples over {} distinct classes", labels.size(),
                     distinct.size());
}

}  // namespace

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be positive");
  if (!(eps1 > 0.0 && eps1 <= 1e-2)) throw ConfigError("eps1 must lie in (0, 1e-2]");
  if (!(eps2 > 0.0 && eps2 <= 1e-2)) throw ConfigError("eps2 must lie in (0, 1e-2]");
  if (!(d_loss_eps > 0.0)) throw ConfigError("d_loss_eps must be positive");
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "pd") return LossKind::pd;
  if (name == "dloss") return LossKind::dloss;
  if (name == "proxynca") return LossKind::proxynca;
  if (name == "triplet") return LossKind::triplet;
  throw ConfigError(fmt::format("unknown loss '{}' (expected pd, dloss, proxynca, triplet)", name));
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::pd: return "pd";
    case LossKind::dloss: return "dloss";
    case LossKind::proxynca: return "proxynca";
    case LossKind::triplet: return "triplet";
  }
  return "?";
}

Tensor scaled_similarities(const Tensor& z, const ProxyBank& bank, double tau) {
  if (!(tau > 0.0)) throw ContractError("scaled_similarities: tau must be positive");
  check_bank_dim(z, bank, "scaled_similarities");
  const Tensor zn = l2_normalize_rows(z, kNormalizeEps);
  return scale(matmul_nt(zn, bank.normalized()), 1.0 / tau);
}

SimilarityPartition partition_similarities(const Tensor& s, std::span<const int> labels) {
  if (s.rank() != 2) {
    throw DimensionError("partition_similarities: expected a matrix, got " +
                         shape_to_string(s.shape()));
  }
  const std::size_t b = s.rows(), c = s.cols();
  check_labels(labels, b, c, "partition_similarities");

  std::vector<std::size_t> gen, imp;
  gen.reserve(b);
  imp.reserve(b * (c - 1));
  for (std::size_t i = 0; i < b; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    gen.push_back(i * c + y);
    for (std::size_t k = 0; k < c; ++k) {
      if (k != y) imp.push_back(i * c + k);
    }
  }
  return {gather(s, gen), gather(s, imp)};
}

DistributionStats batch_stats(const SimilarityPartition& p) {
  if (p.s_gen.size() == 0) throw EmptySetError("batch_stats: genuine set is empty");
  if (p.s_imp.size() == 0) throw EmptySetError("batch_stats: impostor set is empty");
  return {mean(p.s_gen), variance(p.s_gen), mean(p.s_imp), variance(p.s_imp)};
}

Tensor pd_loss(const DistributionStats& stats, double eps1, double eps2) {
  if (!(eps1 > 0.0 && eps2 > 0.0)) throw ContractError("pd_loss: eps1 and eps2 must be positive");
  const Tensor separation = add_scalar(sub(stats.mu_gen, stats.mu_imp), eps1);
  const Tensor spread = add_scalar(add(stats.var_gen, stats.var_imp), eps2);
  return add(scale(ln_clamped(separation, eps1), -1.0), scale(ln_clamped(spread, eps2), 0.5));
}

Tensor pd_loss_from_batch(const Tensor& z, std::span<const int> labels, const ProxyBank& bank,
                          const LossConfig& cfg) {
  const Tensor s = scaled_similarities(z, bank, cfg.tau);
  return pd_loss(batch_stats(partition_similarities(s, labels)), cfg.eps1, cfg.eps2);
}

Tensor d_loss_batch(const Tensor& z, std::span<const int> labels, double eps) {
  if (z.rank() != 2) throw DimensionError("d_loss_batch: expected a matrix of embeddings");
  const std::size_t b = z.rows();
  if (labels.size() != b) {
    throw DimensionError(fmt::format("d_loss_batch: {} labels for {} rows", labels.size(), b));
  }
  std::vector<std::size_t> gen, imp;
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = i + 1; j < b; ++j) {
      (labels[i] == labels[j] ? gen : imp).push_back(i * b + j);
    }
  }
  if (gen.empty()) {
    throw BatchCompositionError("d_loss_batch: no genuine pairs in " + composition(labels));
  }
  if (imp.empty()) {
    throw BatchCompositionError("d_loss_batch: no impostor pairs in " + composition(labels));
  }

  const Tensor zn = l2_normalize_rows(z, kNormalizeEps);
  const Tensor sim = matmul_nt(zn, zn);
  const Tensor s_gen = gather(sim, gen);
  const Tensor s_imp = gather(sim, imp);
  const Tensor spread = sqrt(scale(add(variance(s_gen), variance(s_imp)), 0.5));
  const Tensor gap = add_scalar(abs(sub(mean(s_imp), mean(s_gen))), eps);
  return div(spread, gap);
}

Tensor proxy_nca_loss(const Tensor& z, std::span<const int> labels, const ProxyBank& bank) {
  check_bank_dim(z, bank, "proxy_nca_loss");
  const std::size_t b = z.rows(), c = bank.proxies.rows();
  if (c < 2) throw ConfigError("proxy_nca_loss: needs at least 2 classes");
  check_labels(labels, b, c, "proxy_nca_loss");

  const Tensor zn = l2_normalize_rows(z, kNormalizeEps);
  // ‖z̃ − p̃‖² = 2 − 2·cos for unit vectors
  const Tensor dist = add_scalar(scale(matmul_nt(zn, bank.normalized()), -2.0), 2.0);

  std::vector<std::size_t> gen, imp;
  for (std::size_t i = 0; i < b; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    gen.push_back(i * c + y);
    for (std::size_t k = 0; k < c; ++k) {
      if (k != y) imp.push_back(i * c + k);
    }
  }
  const Tensor d_gen = gather(dist, gen);
  const Tensor d_imp = gather(dist, imp, {b, c - 1});
  return mean(add(d_gen, logsumexp_rows(scale(d_imp, -1.0))));
}

Tensor triplet_loss_batch_all(const Tensor& z, std::span<const int> labels, double alpha) {
  if (z.rank() != 2) throw DimensionError("triplet_loss_batch_all: expected a matrix");
  const std::size_t b = z.rows();
  if (labels.size() != b) {
    throw DimensionError(
        fmt::format("triplet_loss_batch_all: {} labels for {} rows", labels.size(), b));
  }
  std::vector<std::size_t> ap, an, pp, nn;
  for (std::size_t a = 0; a < b; ++a) {
    for (std::size_t p = 0; p < b; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t n = 0; n < b; ++n) {
        if (labels[n] == labels[a]) continue;
        ap.push_back(a * b + p);
        an.push_back(a * b + n);
        pp.push_back(p * b + p);
        nn.push_back(n * b + n);
      }
    }
  }
  if (ap.empty()) {
    throw BatchCompositionError("triplet_loss_batch_all: no valid triplets in " +
                                composition(labels));
  }

  const Tensor zn = l2_normalize_rows(z, kNormalizeEps);
  const Tensor gram = matmul_nt(zn, zn);
  // ‖a−p‖² − ‖a−n‖² = G_pp − G_nn − 2·G_ap + 2·G_an
  const Tensor norms = sub(gather(gram, pp), gather(gram, nn));
  const Tensor cross = scale(sub(gather(gram, an), gather(gram, ap)), 2.0);
  return mean(relu(add_scalar(add(norms, cross), alpha)));
}

Tensor compute_loss(LossKind kind, const Tensor& z, std::span<const int> labels,
                    const ProxyBank& bank, const LossConfig& cfg) {
  switch (kind) {
    case LossKind::pd: return pd_loss_from_batch(z, labels, bank, cfg);
    case LossKind::dloss: return d_loss_batch(z, labels, cfg.d_loss_eps);
    case LossKind::proxynca: return proxy_nca_loss(z, labels, bank);
    case LossKind::triplet: return triplet_loss_batch_all(z, labels, cfg.alpha);
  }
  throw ContractError("compute_loss: unknown loss kind");
}

}  // namespace pdl
