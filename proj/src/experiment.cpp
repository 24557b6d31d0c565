#include "pdl/experiment.hpp"

#include <fmt/format.h>

#include <fstream>
#include <initializer_list>
#include <string_view>

#include "pdl/error.hpp"

namespace pdl {

namespace fs = std::filesystem;

namespace {

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed,
                std::string_view context) {
  if (!j.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", context));
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(fmt::format("{}: unknown key '{}'", context, key));
  }
}

template <typename T>
void read_if(const Json& j, const char* key, T& out, std::string_view context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("{}.{}: {}", context, key, e.what()));
  }
}

std::string_view sampler_name(SamplerKind k) {
  return k == SamplerKind::uniform ? "uniform" : "class_balanced";
}

std::string_view proxy_init_name(ProxyInit k) {
  return k == ProxyInit::random ? "random" : "precomputed";
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

}  // namespace

Json to_json(const MlpConfig& cfg) {
  Json j;
  j["input_dim"] = cfg.input_dim;
  j["hidden_dims"] = cfg.hidden_dims;
  j["embedding_dim"] = cfg.embedding_dim;
  j["activation"] = "relu";
  j["seed"] = cfg.seed;
  return j;
}

Json to_json(const TrainConfig& cfg) {
  Json j;
  j["loss"] = std::string(to_string(cfg.loss));
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["base_lr"] = cfg.base_lr;
  j["weight_decay"] = cfg.weight_decay;
  j["proxy_lr_multiplier"] = cfg.proxy_lr_multiplier;
  j["clip_max_norm"] = cfg.clip_max_norm;
  j["tau"] = cfg.loss_config.tau;
  j["eps1"] = cfg.loss_config.eps1;
  j["eps2"] = cfg.loss_config.eps2;
  j["alpha"] = cfg.loss_config.alpha;
  j["d_loss_eps"] = cfg.loss_config.d_loss_eps;
  j["proxy_init"] = std::string(proxy_init_name(cfg.proxy_init));
  Json sampler;
  sampler["kind"] = std::string(sampler_name(cfg.sampler.kind));
  if (cfg.sampler.kind == SamplerKind::class_balanced) {
    sampler["classes"] = cfg.sampler.classes_per_batch;
    sampler["per_class"] = cfg.sampler.samples_per_class;
  }
  j["sampler"] = sampler;
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["checkpoint_every"] = cfg.checkpoint_every;
  j["k_values"] = cfg.k_values;
  return j;
}

Json to_json(const ValidationMetrics& m) {
  Json j;
  j["d_prime"] = m.d_prime;
  Json recall = Json::object();
  for (const auto& [k, r] : m.recall) recall[std::to_string(k)] = r;
  j["recall"] = recall;
  return j;
}

Json to_json(const EpochLog& log) {
  Json j;
  j["epoch"] = log.epoch;
  j["mean_loss"] = log.mean_loss;
  j["lr"] = log.lr;
  j["steps"] = log.steps;
  if (log.validation) j["val"] = to_json(*log.validation);
  return j;
}

MlpConfig mlp_config_from_json(const Json& j) {
  constexpr std::string_view ctx = "model";
  check_keys(j, {"input_dim", "hidden_dims", "embedding_dim", "activation", "seed"}, ctx);
  MlpConfig cfg;
  read_if(j, "input_dim", cfg.input_dim, ctx);
  read_if(j, "hidden_dims", cfg.hidden_dims, ctx);
  read_if(j, "embedding_dim", cfg.embedding_dim, ctx);
  read_if(j, "seed", cfg.seed, ctx);
  std::string activation = "relu";
  read_if(j, "activation", activation, ctx);
  if (activation != "relu") throw ConfigError("model.activation: only 'relu' is supported");
  cfg.validate();
  return cfg;
}

TrainConfig train_config_from_json(const Json& j) {
  constexpr std::string_view ctx = "train";
  check_keys(j,
             {"loss", "epochs", "batch_size", "base_lr", "weight_decay", "proxy_lr_multiplier",
              "clip_max_norm", "tau", "eps1", "eps2", "alpha", "d_loss_eps", "proxy_init",
              "sampler", "seed", "eval_every", "checkpoint_every", "k_values"},
             ctx);
  TrainConfig cfg;
  std::string loss = "pd";
  read_if(j, "loss", loss, ctx);
  cfg.loss = parse_loss_kind(loss);
  read_if(j, "epochs", cfg.epochs, ctx);
  read_if(j, "batch_size", cfg.batch_size, ctx);
  read_if(j, "base_lr", cfg.base_lr, ctx);
  read_if(j, "weight_decay", cfg.weight_decay, ctx);
  read_if(j, "proxy_lr_multiplier", cfg.proxy_lr_multiplier, ctx);
  read_if(j, "clip_max_norm", cfg.clip_max_norm, ctx);
  read_if(j, "tau", cfg.loss_config.tau, ctx);
  read_if(j, "eps1", cfg.loss_config.eps1, ctx);
  read_if(j, "eps2", cfg.loss_config.eps2, ctx);
  read_if(j, "alpha", cfg.loss_config.alpha, ctx);
  read_if(j, "d_loss_eps", cfg.loss_config.d_loss_eps, ctx);
  std::string init = "random";
  read_if(j, "proxy_init", init, ctx);
  if (init == "random") {
    cfg.proxy_init = ProxyInit::random;
  } else if (init == "precomputed") {
    cfg.proxy_init = ProxyInit::precomputed;
  } else {
    throw ConfigError("train.proxy_init: expected 'random' or 'precomputed', got '" + init + "'");
  }
  if (j.contains("sampler")) {
    const auto& s = j.at("sampler");
    check_keys(s, {"kind", "classes", "per_class"}, "train.sampler");
    std::string kind = "uniform";
    read_if(s, "kind", kind, "train.sampler");
    if (kind == "uniform") {
      cfg.sampler.kind = SamplerKind::uniform;
    } else if (kind == "class_balanced") {
      cfg.sampler.kind = SamplerKind::class_balanced;
      read_if(s, "classes", cfg.sampler.classes_per_batch, "train.sampler");
      read_if(s, "per_class", cfg.sampler.samples_per_class, "train.sampler");
    } else {
      throw ConfigError("train.sampler.kind: expected 'uniform' or 'class_balanced'");
    }
  }
  read_if(j, "seed", cfg.seed, ctx);
  read_if(j, "eval_every", cfg.eval_every, ctx);
  read_if(j, "checkpoint_every", cfg.checkpoint_every, ctx);
  read_if(j, "k_values", cfg.k_values, ctx);
  cfg.validate();
  return cfg;
}

ExperimentFile experiment_from_json(const Json& j, const fs::path& base_dir) {
  check_keys(j, {"data", "model", "train", "output_dir"}, "experiment");
  if (!j.contains("data")) throw ConfigError("experiment: missing 'data' section");
  ExperimentFile exp;
  const auto& data = j.at("data");
  check_keys(data, {"features", "labels", "val_fraction", "split_seed"}, "data");
  std::string features, labels;
  read_if(data, "features", features, "data");
  read_if(data, "labels", labels, "data");
  if (features.empty() || labels.empty()) {
    throw ConfigError("data: both 'features' and 'labels' are required");
  }
  exp.features = resolve(base_dir, features);
  exp.labels = resolve(base_dir, labels);
  read_if(data, "val_fraction", exp.val_fraction, "data");
  read_if(data, "split_seed", exp.split_seed, "data");
  if (!(exp.val_fraction > 0.0 && exp.val_fraction < 1.0)) {
    throw ConfigError("data.val_fraction must lie in (0, 1)");
  }
  if (j.contains("train")) exp.train = train_config_from_json(j.at("train"));
  if (j.contains("model")) {
    exp.model = mlp_config_from_json(j.at("model"));
    if (!j.at("model").contains("seed")) exp.model.seed = exp.train.seed;
  } else {
    exp.model.seed = exp.train.seed;
  }
  std::string out = "runs";
  read_if(j, "output_dir", out, "experiment");
  exp.output_dir = resolve(base_dir, out);
  return exp;
}

ExperimentFile load_experiment(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open experiment file " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
  return experiment_from_json(j, path.parent_path());
}

}  // namespace pdl
