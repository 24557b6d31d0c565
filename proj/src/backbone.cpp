#include "pdl/backbone.hpp"

#include <cmath>
#include <random>

#include "pdl/error.hpp"

namespace pdl {

void MlpConfig::validate() const {
  if (input_dim == 0) throw ConfigError("input_dim must be positive");
  if (embedding_dim < 2) throw ConfigError("embedding_dim must be at least 2");
  for (auto h : hidden_dims) {
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  }
}

std::vector<Tensor*> MlpParams::tensors() {
  std::vector<Tensor*> out;
  for (auto& layer : layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const Tensor*> MlpParams::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& layer : layers) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

MlpParams init_params(const MlpConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  MlpParams params{cfg, {}};

  std::vector<std::size_t> widths{cfg.input_dim};
  widths.insert(widths.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
  widths.push_back(cfg.embedding_dim);

  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const std::size_t fan_in = widths[l], fan_out = widths[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(fan_in * fan_out);
    for (auto& v : w) v = dist(rng);
    params.layers.push_back({Tensor({fan_in, fan_out}, std::move(w), true),
                             Tensor({fan_out}, std::vector<double>(fan_out, 0.0), true)});
  }
  return params;
}

Tensor embed(const MlpParams& params, const Tensor& x) {
  if (x.rank() != 2 || x.cols() != params.config.input_dim) {
    throw DimensionError("embed: input " + shape_to_string(x.shape()) + " but input_dim is " +
                         std::to_string(params.config.input_dim));
  }
  Tensor h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    h = affine(h, params.layers[l].weight, params.layers[l].bias);
    if (l + 1 < params.layers.size()) h = relu(h);
  }
  return l2_normalize_rows(h, kNormalizeEps);
}

MlpParams watch(Tape& tape, const MlpParams& params) {
  MlpParams out = params;
  for (auto* t : out.tensors()) *t = tape.watch(*t);
  return out;
}

}  // namespace pdl
