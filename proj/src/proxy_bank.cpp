#include "pdl/proxy_bank.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <random>

#include "pdl/error.hpp"
#include "pdl/kernels.hpp"

namespace pdl {

Tensor ProxyBank::normalized(double eps) const {
  const auto norms = kernels::row_norms(proxies.values(), proxies.rows(), proxies.cols());
  for (std::size_t c = 0; c < norms.size(); ++c) {
    if (norms[c] < eps) spdlog::warn("proxy {} has norm {} below eps {}", c, norms[c], eps);
  }
  return l2_normalize_rows(proxies, eps);
}

ProxyBank init_random(int num_classes, std::size_t dim, std::uint64_t seed) {
  if (num_classes < 2) {
    throw ConfigError("proxy bank needs at least 2 classes, otherwise the impostor set is empty");
  }
  if (dim < 2) throw ConfigError("proxy dimension must be at least 2");
  const auto c = static_cast<std::size_t>(num_classes);
  const double bound = std::sqrt(6.0 / static_cast<double>(dim));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(c * dim);
  for (auto& v : values) v = dist(rng);
  return {Tensor({c, dim}, std::move(values), true), num_classes, ProxyInit::random};
}

ProxyBank init_precomputed(const MlpParams& params, const LabeledDataset& dataset) {
  if (dataset.class_count < 2) {
    throw ConfigError("proxy bank needs at least 2 classes, otherwise the impostor set is empty");
  }
  const auto c = static_cast<std::size_t>(dataset.class_count);
  const Tensor z = embed(params, dataset.features);
  const std::size_t d = z.cols();

  std::vector<double> sums(c * d, 0.0);
  std::vector<std::size_t> counts(c, 0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto k = static_cast<std::size_t>(dataset.labels[i]);
    ++counts[k];
    for (std::size_t j = 0; j < d; ++j) sums[k * d + j] += z.at(i, j);
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (counts[k] == 0) {
      throw MissingClassError("class " + std::to_string(k) + " has no samples to average");
    }
    for (std::size_t j = 0; j < d; ++j) sums[k * d + j] /= static_cast<double>(counts[k]);
  }
  return {Tensor({c, d}, std::move(sums), true), dataset.class_count, ProxyInit::precomputed};
}

ProxyBank watch(Tape& tape, const ProxyBank& bank) {
  ProxyBank out = bank;
  out.proxies = tape.watch(bank.proxies);
  return out;
}

}  // namespace pdl
