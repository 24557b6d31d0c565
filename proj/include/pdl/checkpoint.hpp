#pragma once

// Checkpoint file: one line of JSON (configs, epoch, rng state, buffer
// table) terminated by '\n', followed by the parameter buffers as raw
// little-endian f64 in the order the table lists them (backbone layers, then
// proxies). Writes go to a temporary file that is renamed into place.

#include <filesystem>
#include <optional>

#include "pdl/backbone.hpp"
#include "pdl/experiment.hpp"
#include "pdl/proxy_bank.hpp"
#include "pdl/trainer.hpp"

namespace pdl {

struct Checkpoint {
  MlpParams params;
  std::optional<ProxyBank> bank;
  std::optional<TrainConfig> train_config;
  int epoch = 0;
  /// Batches are drawn from (seed, epoch), so this pair is the full rng state.
  std::uint64_t rng_seed = 0;
  int rng_next_epoch = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pdl
