#include "pdl/trainer.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "pdl/error.hpp"
#include "pdl/stats_eval.hpp"

namespace pdl {

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

std::vector<std::size_t> param_sizes(const MlpParams& params, const ProxyBank& bank,
                                     bool with_proxies) {
  std::vector<std::size_t> sizes;
  for (const auto* t : params.tensors()) sizes.push_back(t->size());
  if (with_proxies) sizes.push_back(bank.proxies.size());
  return sizes;
}

bool loss_uses_proxies(LossKind kind) {
  return kind == LossKind::pd || kind == LossKind::proxynca;
}

constexpr std::uint64_t kProxySeedSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch_size must be at least 2");
  if (!(base_lr >= 0.0)) throw ConfigError("base_lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(proxy_lr_multiplier >= 1.0)) throw ConfigError("proxy_lr_multiplier must be >= 1");
  if (!(clip_max_norm > 0.0)) throw ConfigError("clip_max_norm must be positive");
  if (eval_every < 1) throw ConfigError("eval_every must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be non-negative");
  if (k_values.empty()) throw ConfigError("k_values must not be empty");
  loss_config.validate();
  if (sampler.kind == SamplerKind::class_balanced) {
    if (sampler.classes_per_batch < 1 || sampler.samples_per_class < 1) {
      throw ConfigError("class_balanced sampler needs positive P and K");
    }
    if (sampler.classes_per_batch * sampler.samples_per_class != batch_size) {
      throw ConfigError(fmt::format("class_balanced sampler: P·K = {}·{} != batch_size {}",
                                    sampler.classes_per_batch, sampler.samples_per_class,
                                    batch_size));
    }
  }
}

std::vector<std::vector<std::size_t>> sample_batches(std::span<const int> labels,
                                                     int batch_size, const SamplerConfig& sampler,
                                                     std::uint64_t seed, int epoch) {
  const std::size_t n = labels.size();
  if (batch_size < 1 || static_cast<std::size_t>(batch_size) > n) {
    throw SamplerError(fmt::format("batch size {} does not fit {} samples", batch_size, n));
  }
  const auto bs = static_cast<std::size_t>(batch_size);
  const std::size_t num_batches = n / bs;
  auto rng = epoch_rng(seed, epoch);
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve(num_batches);

  if (sampler.kind == SamplerKind::uniform) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < num_batches; ++b) {
      batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b * bs),
                           order.begin() + static_cast<std::ptrdiff_t>((b + 1) * bs));
    }
    return batches;
  }

  const auto p = static_cast<std::size_t>(sampler.classes_per_batch);
  const auto k = static_cast<std::size_t>(sampler.samples_per_class);
  if (p * k != bs) {
    throw SamplerError(fmt::format("class_balanced: P·K = {} != batch size {}", p * k, bs));
  }
  std::map<int, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < n; ++i) members[labels[i]].push_back(i);
  std::vector<int> classes;
  for (const auto& [c, idx] : members) classes.push_back(c);
  if (classes.size() < p) {
    throw SamplerError(fmt::format("class_balanced: {} classes requested per batch, {} available",
                                   p, classes.size()));
  }

  for (std::size_t b = 0; b < num_batches; ++b) {
    std::shuffle(classes.begin(), classes.end(), rng);
    std::vector<std::size_t> batch;
    batch.reserve(bs);
    for (std::size_t ci = 0; ci < p; ++ci) {
      auto pool = members[classes[ci]];
      if (pool.size() >= k) {
        std::shuffle(pool.begin(), pool.end(), rng);
        batch.insert(batch.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
        for (std::size_t s = 0; s < k; ++s) batch.push_back(pool[pick(rng)]);
      }
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

ValidationMetrics evaluate(const MlpParams& params, const LabeledDataset& ds,
                           std::span<const int> k_values) {
  const Tensor z = embed(params, ds.features);
  ValidationMetrics out;
  out.d_prime = decidability_index(genuine_impostor_scores(z, ds.labels, ScoreKind::distance));
  out.recall = recall_at_k(z, ds.labels, k_values).recall;
  return out;
}

TrainState::TrainState(TrainConfig cfg, MlpParams p, ProxyBank b)
    : config(std::move(cfg)),
      params(std::move(p)),
      bank(std::move(b)),
      optimizer(param_sizes(params, bank, loss_uses_proxies(config.loss))) {}

bool TrainState::updates_proxies() const { return loss_uses_proxies(config.loss); }

std::vector<Tensor*> TrainState::trainable() {
  auto out = params.tensors();
  if (updates_proxies()) out.push_back(&bank.proxies);
  return out;
}

TrainState make_train_state(const TrainConfig& cfg, const MlpConfig& mlp,
                            const LabeledDataset& train) {
  cfg.validate();
  mlp.validate();
  if (train.dim() != mlp.input_dim) {
    throw DimensionError(fmt::format("dataset has {} features but input_dim is {}", train.dim(),
                                     mlp.input_dim));
  }
  if (train.class_count < 2) throw ConfigError("training set needs at least 2 classes");
  auto params = init_params(mlp);
  auto bank = cfg.proxy_init == ProxyInit::random
                  ? init_random(train.class_count, mlp.embedding_dim, cfg.seed ^ kProxySeedSalt)
                  : init_precomputed(params, train);
  return TrainState(cfg, std::move(params), std::move(bank));
}

double train_step(TrainState& state, const LabeledDataset& train,
                  std::span<const std::size_t> batch, double lr, int epoch,
                  const FitHooks& hooks) {
  const auto& cfg = state.config;
  const std::size_t d = train.dim();
  std::vector<double> rows;
  rows.reserve(batch.size() * d);
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (auto i : batch) {
    for (std::size_t j = 0; j < d; ++j) rows.push_back(train.features.at(i, j));
    labels.push_back(train.labels[i]);
  }
  const Tensor x({batch.size(), d}, std::move(rows));

  Tape tape;
  const MlpParams bound_params = watch(tape, state.params);
  const ProxyBank bound_bank = watch(tape, state.bank);
  Tensor loss;
  try {
    const Tensor z = embed(bound_params, x);
    loss = compute_loss(cfg.loss, z, labels, bound_bank, cfg.loss_config);
  } catch (const BatchCompositionError& e) {
    throw BatchCompositionError(fmt::format("epoch {}, step {}: {}", epoch, state.global_step,
                                            e.what()));
  }
  const double loss_value = loss.item();
  if (!std::isfinite(loss_value)) {
    throw Error(fmt::format("non-finite loss at epoch {}, step {}", epoch, state.global_step));
  }
  const Gradients grads = tape.backward(loss);

  ParamGrads buffers;
  for (const auto* t : bound_params.tensors()) {
    const auto g = grads.of(*t).values();
    buffers.emplace_back(g.begin(), g.end());
  }
  std::vector<double> lrs(buffers.size(), lr);
  if (state.updates_proxies()) {
    const auto g = grads.of(bound_bank.proxies).values();
    buffers.emplace_back(g.begin(), g.end());
    lrs.push_back(lr * cfg.proxy_lr_multiplier);
  }

  const ClipResult clip = clip_grad_norm(buffers, cfg.clip_max_norm);
  auto targets = state.trainable();
  state.optimizer.step(targets, buffers, lrs, cfg.weight_decay);

  if (hooks.on_step) {
    hooks.on_step({epoch, state.global_step, loss_value, clip.norm_before, global_norm(buffers),
                   &buffers});
  }
  ++state.global_step;
  return loss_value;
}

FitResult fit(const TrainConfig& cfg, const MlpConfig& mlp, const LabeledDataset& train,
              const LabeledDataset* val, const FitHooks& hooks) {
  TrainState state = make_train_state(cfg, mlp, train);
  const bool validate = val != nullptr && val->size() >= 2;

  FitResult result;
  if (validate) result.initial_validation = evaluate(state.params, *val, cfg.k_values);
  if (hooks.on_start) hooks.on_start(result.initial_validation);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    EpochLog log;
    log.epoch = epoch;
    log.lr = cosine_anneal_lr(cfg.base_lr, epoch, cfg.epochs);
    const auto batches = sample_batches(train.labels, cfg.batch_size, cfg.sampler, cfg.seed, epoch);
    double total = 0.0;
    for (const auto& batch : batches) total += train_step(state, train, batch, log.lr, epoch, hooks);
    log.steps = batches.size();
    log.mean_loss = batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
    const bool last = epoch + 1 == cfg.epochs;
    if (validate && ((epoch + 1) % cfg.eval_every == 0 || last)) {
      log.validation = evaluate(state.params, *val, cfg.k_values);
    }
    if (hooks.on_epoch) hooks.on_epoch(log, state.params, state.bank);
    result.logs.push_back(std::move(log));
  }
  result.params = std::move(state.params);
  result.bank = std::move(state.bank);
  return result;
}

}  // namespace pdl
