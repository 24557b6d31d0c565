#pragma once

#include <cstdint>
#include <vector>

#include "pdl/tensor.hpp"

namespace pdl {

enum class Activation { relu };

struct MlpConfig {
  std::size_t input_dim = 32;
  std::vector<std::size_t> hidden_dims{64};
  std::size_t embedding_dim = 32;
  Activation activation = Activation::relu;
  std::uint64_t seed = 0;

  /// Throws ConfigError on zero widths or embedding_dim < 2.
  void validate() const;
};

struct DenseLayer {
  Tensor weight;  // fan_in × fan_out
  Tensor bias;    // fan_out
};

struct MlpParams {
  MlpConfig config;
  std::vector<DenseLayer> layers;

  /// Weights and biases in layer order (w0, b0, w1, b1, ...).
  std::vector<Tensor*> tensors();
  std::vector<const Tensor*> tensors() const;
};

/// Kaiming-uniform weights (bound sqrt(6/fan_in)), zero biases.
MlpParams init_params(const MlpConfig& cfg);

/// affine → relu for each hidden layer, a final affine, then row L2
/// normalization. Params may be tape-bound (training) or constant.
Tensor embed(const MlpParams& params, const Tensor& x);

/// Copy of `params` whose tensors are watched on `tape`.
MlpParams watch(Tape& tape, const MlpParams& params);

inline constexpr double kNormalizeEps = 1e-12;

}  // namespace pdl
