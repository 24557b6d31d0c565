#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "pdl/backbone.hpp"
#include "pdl/dataio.hpp"
#include "pdl/losses.hpp"
#include "pdl/optim.hpp"
#include "pdl/proxy_bank.hpp"

namespace pdl {

enum class SamplerKind { uniform, class_balanced };

struct SamplerConfig {
  SamplerKind kind = SamplerKind::uniform;
  int classes_per_batch = 0;  // P
  int samples_per_class = 0;  // K
};

struct TrainConfig {
  LossKind loss = LossKind::pd;
  int epochs = 100;
  int batch_size = 32;
  double base_lr = 1e-3;
  double weight_decay = 1e-4;
  double proxy_lr_multiplier = 1.0;
  double clip_max_norm = 1.0;
  LossConfig loss_config;
  ProxyInit proxy_init = ProxyInit::random;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  int eval_every = 1;
  int checkpoint_every = 0;  // 0: final checkpoint only
  std::vector<int> k_values{1, 2, 4, 8};

  void validate() const;
};

/// Index batches for one epoch. Uniform: seeded shuffle, ⌊n/batch_size⌋ full
/// batches. Class-balanced: P random classes × K samples each.
std::vector<std::vector<std::size_t>> sample_batches(std::span<const int> labels,
                                                     int batch_size, const SamplerConfig& sampler,
                                                     std::uint64_t seed, int epoch);

struct ValidationMetrics {
  double d_prime = 0.0;
  std::map<int, double> recall;
};

/// Embeds `ds` and reports d′ of cosine distances plus Recall@K.
ValidationMetrics evaluate(const MlpParams& params, const LabeledDataset& ds,
                           std::span<const int> k_values);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::size_t steps = 0;
  std::optional<ValidationMetrics> validation;
};

struct StepInfo {
  int epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double grad_norm_before = 0.0;
  double grad_norm_after = 0.0;
  const ParamGrads* grads = nullptr;  // post-clip, backbone tensors then proxies
};

struct FitHooks {
  /// Called once before the first epoch with the untrained validation metrics.
  std::function<void(const std::optional<ValidationMetrics>&)> on_start;
  std::function<void(const StepInfo&)> on_step;
  std::function<void(const EpochLog&, const MlpParams&, const ProxyBank&)> on_epoch;
};

/// Everything a training step mutates.
struct TrainState {
  TrainConfig config;
  MlpParams params;
  ProxyBank bank;
  AdamW optimizer;
  std::size_t global_step = 0;

  TrainState(TrainConfig cfg, MlpParams p, ProxyBank b);

  /// True when the configured loss reads the proxies.
  bool updates_proxies() const;
  std::vector<Tensor*> trainable();
};

/// Builds params and proxies for `train` per the configs.
TrainState make_train_state(const TrainConfig& cfg, const MlpConfig& mlp,
                            const LabeledDataset& train);

/// forward → loss → backward → clip → AdamW (proxies at lr·multiplier).
/// Returns the batch loss.
double train_step(TrainState& state, const LabeledDataset& train,
                  std::span<const std::size_t> batch, double lr, int epoch,
                  const FitHooks& hooks = {});

struct FitResult {
  MlpParams params;
  ProxyBank bank;
  std::optional<ValidationMetrics> initial_validation;
  std::vector<EpochLog> logs;
};

FitResult fit(const TrainConfig& cfg, const MlpConfig& mlp, const LabeledDataset& train,
              const LabeledDataset* val, const FitHooks& hooks = {});

}  // namespace pdl
