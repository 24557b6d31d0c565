#pragma once

#include <cstdint>

#include "pdl/backbone.hpp"
#include "pdl/dataio.hpp"
#include "pdl/tensor.hpp"

namespace pdl {

enum class ProxyInit { random, precomputed };

/// C learnable class proxies, one row per class.
struct ProxyBank {
  Tensor proxies;  // C × D
  int num_classes = 0;
  ProxyInit init_kind = ProxyInit::random;

  std::size_t dim() const { return proxies.cols(); }

  /// Rows L2-normalized; differentiable back into `proxies` when tape-bound.
  /// Rows with norm below eps are logged and stay near zero.
  Tensor normalized(double eps = kNormalizeEps) const;
};

/// Kaiming-uniform entries with fan_in = D.
ProxyBank init_random(int num_classes, std::size_t dim, std::uint64_t seed);

/// Proxy c is the (unnormalized) mean of the L2-normalized embeddings of class
/// c over one forward pass of `dataset`.
ProxyBank init_precomputed(const MlpParams& params, const LabeledDataset& dataset);

/// Copy whose proxies are watched on `tape`.
ProxyBank watch(Tape& tape, const ProxyBank& bank);

}  // namespace pdl
