#include "pdl/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pdl/error.hpp"

namespace pdl {

double cosine_anneal_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw ContractError("cosine_anneal_lr: epoch " + std::to_string(epoch) +
                        " outside [0, " + std::to_string(total_epochs) + ")");
  }
  const double phase = std::numbers::pi * static_cast<double>(epoch) / total_epochs;
  return std::max(0.0, base_lr * 0.5 * (1.0 + std::cos(phase)));
}

double global_norm(const ParamGrads& grads) {
  double acc = 0.0;
  for (const auto& g : grads)
    for (double v : g) acc += v * v;
  return std::sqrt(acc);
}

ClipResult clip_grad_norm(ParamGrads& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm must be positive");
  ClipResult result{global_norm(grads), 1.0};
  if (result.norm_before > max_norm) {
    result.scale = max_norm / result.norm_before;
    for (auto& g : grads)
      for (double& v : g) v *= result.scale;
  }
  return result;
}

AdamW::AdamW(std::span<const std::size_t> param_sizes) {
  for (auto n : param_sizes) {
    state_.first_moment.emplace_back(n, 0.0);
    state_.second_moment.emplace_back(n, 0.0);
  }
}

void AdamW::step(std::span<Tensor* const> params, const ParamGrads& grads,
                 std::span<const double> lrs, double weight_decay) {
  const std::size_t count = state_.first_moment.size();
  if (params.size() != count || grads.size() != count || lrs.size() != count) {
    throw ContractError("AdamW::step: expected " + std::to_string(count) +
                        " parameters, gradients and learning rates");
  }
  for (std::size_t p = 0; p < count; ++p) {
    if (params[p]->size() != state_.first_moment[p].size() ||
        grads[p].size() != state_.first_moment[p].size()) {
      throw ContractError("AdamW::step: shape mismatch for parameter " + std::to_string(p));
    }
  }

  ++state_.step;
  const auto t = static_cast<double>(state_.step);
  const double c1 = 1.0 - std::pow(state_.beta1, t);
  const double c2 = 1.0 - std::pow(state_.beta2, t);

  for (std::size_t p = 0; p < count; ++p) {
    auto& m = state_.first_moment[p];
    auto& v = state_.second_moment[p];
    const auto& g = grads[p];
    const double lr = lrs[p];
    std::vector<double> theta(params[p]->values().begin(), params[p]->values().end());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      theta[i] -= lr * weight_decay * theta[i];
      m[i] = state_.beta1 * m[i] + (1.0 - state_.beta1) * g[i];
      v[i] = state_.beta2 * v[i] + (1.0 - state_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + state_.adam_eps);
    }
    *params[p] = Tensor(params[p]->shape(), std::move(theta), params[p]->requires_grad());
  }
}

void AdamW::step(std::span<Tensor* const> params, const ParamGrads& grads, double lr,
                 double weight_decay) {
  const std::vector<double> lrs(params.size(), lr);
  step(params, grads, lrs, weight_decay);
}

}  // namespace pdl
