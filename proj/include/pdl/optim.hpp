#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pdl/tensor.hpp"

namespace pdl {

/// One gradient buffer per parameter, in the same order as the parameters.
using ParamGrads = std::vector<std::vector<double>>;

/// base_lr · ½(1 + cos(π·epoch/total_epochs)), floored at 0.
double cosine_anneal_lr(double base_lr, int epoch, int total_epochs);

struct ClipResult {
  double norm_before = 0.0;
  double scale = 1.0;
};

/// Rescales all buffers jointly so their global L2 norm is at most max_norm.
ClipResult clip_grad_norm(ParamGrads& grads, double max_norm);

double global_norm(const ParamGrads& grads);

struct OptimizerState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
};

/// Adam with bias correction and decoupled weight decay.
class AdamW {
 public:
  explicit AdamW(std::span<const std::size_t> param_sizes);

  /// θ ← θ − lr·wd·θ, then θ ← θ − lr·m̂/(√v̂ + ε). `lrs` holds one learning
  /// rate per parameter.
  void step(std::span<Tensor* const> params, const ParamGrads& grads, std::span<const double> lrs,
            double weight_decay);

  /// Same learning rate for every parameter.
  void step(std::span<Tensor* const> params, const ParamGrads& grads, double lr,
            double weight_decay);

  const OptimizerState& state() const { return state_; }

 private:
  OptimizerState state_;
};

}  // namespace pdl
