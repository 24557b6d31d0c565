#pragma once

#include <filesystem>
#include <optional>

#include "json.hpp"
#include "pdl/backbone.hpp"
#include "pdl/trainer.hpp"

namespace pdl {

using Json = nlohmann::ordered_json;

Json to_json(const MlpConfig& cfg);
Json to_json(const TrainConfig& cfg);
Json to_json(const ValidationMetrics& m);
Json to_json(const EpochLog& log);

/// Missing keys keep their defaults; unknown keys throw ConfigError.
MlpConfig mlp_config_from_json(const Json& j);
TrainConfig train_config_from_json(const Json& j);

/// A training run described on disk. Relative paths are resolved against the
/// directory holding the experiment file.
struct ExperimentFile {
  std::filesystem::path features;
  std::filesystem::path labels;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::filesystem::path output_dir = "runs";
  MlpConfig model;
  TrainConfig train;
};

ExperimentFile load_experiment(const std::filesystem::path& path);
ExperimentFile experiment_from_json(const Json& j, const std::filesystem::path& base_dir);

}  // namespace pdl
