#include "pdl/checkpoint.hpp"

#include <fmt/format.h>

#include <bit>
#include <fstream>
#include <sstream>

#include "pdl/error.hpp"

namespace pdl {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kFormat = "pdl-checkpoint-1";

void append_f64(std::string& out, std::span<const double> values) {
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
  }
}

std::vector<double> read_f64(const std::string& in, std::size_t offset, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + 8 * k + i]))
              << (8 * i);
    }
    out[k] = std::bit_cast<double>(bits);
  }
  return out;
}

Json buffer_entry(std::string name, const Tensor& t) {
  Json j;
  j["name"] = std::move(name);
  j["shape"] = t.shape();
  j["length"] = t.size();
  return j;
}

}  // namespace

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  Json header;
  header["format"] = kFormat;
  header["model"] = to_json(ckpt.params.config);
  if (ckpt.train_config) header["train"] = to_json(*ckpt.train_config);
  header["epoch"] = ckpt.epoch;
  header["rng_state"] = {{"seed", ckpt.rng_seed}, {"next_epoch", ckpt.rng_next_epoch}};
  if (ckpt.bank) {
    header["num_classes"] = ckpt.bank->num_classes;
    header["proxy_init"] = ckpt.bank->init_kind == ProxyInit::random ? "random" : "precomputed";
  }

  Json buffers = Json::array();
  std::string payload;
  for (std::size_t l = 0; l < ckpt.params.layers.size(); ++l) {
    const auto& layer = ckpt.params.layers[l];
    buffers.push_back(buffer_entry(fmt::format("layer{}.weight", l), layer.weight));
    append_f64(payload, layer.weight.values());
    buffers.push_back(buffer_entry(fmt::format("layer{}.bias", l), layer.bias));
    append_f64(payload, layer.bias.values());
  }
  if (ckpt.bank) {
    buffers.push_back(buffer_entry("proxies", ckpt.bank->proxies));
    append_f64(payload, ckpt.bank->proxies.values());
  }
  header["buffers"] = buffers;

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    const std::string head = header.dump() + "\n";
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();

  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    throw FormatError(fmt::format("{}: no header terminator before byte offset {}", path.string(),
                                  bytes.size()));
  }
  Json header;
  try {
    header = Json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(fmt::format("{}: header parse error at byte offset {}", path.string(),
                                  e.byte));
  }
  if (header.value("format", "") != kFormat) {
    throw FormatError(path.string() + ": not a checkpoint (byte offset 0)");
  }

  Checkpoint ckpt;
  const MlpConfig model = mlp_config_from_json(header.at("model"));
  if (header.contains("train")) ckpt.train_config = train_config_from_json(header.at("train"));
  ckpt.epoch = header.value("epoch", 0);
  ckpt.rng_seed = header.at("rng_state").value("seed", std::uint64_t{0});
  ckpt.rng_next_epoch = header.at("rng_state").value("next_epoch", 0);

  std::size_t offset = newline + 1;
  std::vector<Tensor> tensors;
  std::vector<std::string> names;
  for (const auto& entry : header.at("buffers")) {
    const auto shape = entry.at("shape").get<Shape>();
    const auto length = entry.at("length").get<std::size_t>();
    if (shape_size(shape) != length) {
      throw FormatError(fmt::format("{}: buffer '{}' declares inconsistent length", path.string(),
                                    entry.at("name").get<std::string>()));
    }
    if (offset + 8 * length > bytes.size()) {
      throw FormatError(fmt::format("{}: buffer '{}' truncated at byte offset {}", path.string(),
                                    entry.at("name").get<std::string>(), bytes.size()));
    }
    tensors.emplace_back(shape, read_f64(bytes, offset, length), true);
    names.push_back(entry.at("name").get<std::string>());
    offset += 8 * length;
  }
  if (offset != bytes.size()) {
    throw FormatError(fmt::format("{}: {} trailing bytes after byte offset {}", path.string(),
                                  bytes.size() - offset, offset));
  }

  const std::size_t layers = model.hidden_dims.size() + 1;
  const bool has_bank = tensors.size() == 2 * layers + 1;
  if (tensors.size() != 2 * layers && !has_bank) {
    throw FormatError(fmt::format("{}: expected {} layer buffers, found {}", path.string(),
                                  2 * layers, tensors.size()));
  }
  ckpt.params.config = model;
  std::size_t fan_in = model.input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t fan_out = l + 1 < layers ? model.hidden_dims[l] : model.embedding_dim;
    const Tensor& w = tensors[2 * l];
    const Tensor& b = tensors[2 * l + 1];
    if (w.shape() != Shape{fan_in, fan_out} || b.shape() != Shape{fan_out}) {
      throw FormatError(fmt::format("{}: layer {} buffers do not match the model config",
                                    path.string(), l));
    }
    ckpt.params.layers.push_back({w, b});
    fan_in = fan_out;
  }
  if (has_bank) {
    const Tensor& p = tensors.back();
    if (p.rank() != 2 || p.cols() != model.embedding_dim) {
      throw FormatError(path.string() + ": proxy buffer does not match embedding_dim");
    }
    ProxyBank bank;
    bank.proxies = p;
    bank.num_classes = static_cast<int>(p.rows());
    bank.init_kind = header.value("proxy_init", "random") == "precomputed" ? ProxyInit::precomputed
                                                                           : ProxyInit::random;
    ckpt.bank = bank;
  }
  return ckpt;
}

}  // namespace pdl
