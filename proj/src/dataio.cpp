#include "pdl/dataio.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "json.hpp"
#include "pdl/error.hpp"

namespace pdl {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic{'P', 'D', 'L', '1'};
constexpr std::size_t kHeaderBytes = 12;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint32_t get_u32(const std::string& in, std::size_t offset) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  }
  return v;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

bool has_magic(const std::string& bytes) {
  return bytes.size() >= kMagic.size() && std::equal(kMagic.begin(), kMagic.end(), bytes.begin());
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::vector<double>> parse_csv(const std::string& text, const fs::path& path) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest = line;
    while (true) {
      const auto comma = rest.find(',');
      const auto cell = trim(rest.substr(0, comma));
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || cell.empty()) {
        throw FormatError(fmt::format("{}:{}: cannot parse '{}' as a number", path.string(),
                                      line_no, cell));
      }
      row.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(fmt::format("{}:{}: expected {} columns, found {}", path.string(), line_no,
                                    rows.front().size(), row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  const std::size_t d = dim();
  std::vector<double> feats;
  feats.reserve(indices.size() * d);
  std::vector<int> lab;
  lab.reserve(indices.size());
  for (auto i : indices) {
    for (std::size_t j = 0; j < d; ++j) feats.push_back(features.at(i, j));
    lab.push_back(labels[i]);
  }
  return {Tensor({indices.size(), d}, std::move(feats)), std::move(lab), class_count, name, seed};
}

LabeledDataset gen_synthetic(int num_classes, int per_class, int dim, double noise_sigma,
                             std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
  if (per_class < 2) throw ConfigError("gen_synthetic: need at least 2 samples per class");
  if (dim < 2) throw ConfigError("gen_synthetic: dim must be at least 2");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ConfigError("gen_synthetic: noise sigma must be finite and non-negative");
  }

  const auto c = static_cast<std::size_t>(num_classes);
  const auto d = static_cast<std::size_t>(dim);
  const auto per = static_cast<std::size_t>(per_class);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<double> directions(c * d);
  for (std::size_t k = 0; k < c; ++k) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        directions[k * d + j] = normal(rng);
        norm += directions[k * d + j] * directions[k * d + j];
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (std::size_t j = 0; j < d; ++j) directions[k * d + j] /= norm;
  }

  std::vector<double> feats(c * per * d);
  std::vector<int> labels(c * per);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t s = 0; s < per; ++s) {
      const std::size_t row = k * per + s;
      labels[row] = static_cast<int>(k);
      for (std::size_t j = 0; j < d; ++j) {
        feats[row * d + j] = directions[k * d + j] + noise_sigma * normal(rng);
      }
    }
  }
  return {Tensor({c * per, d}, std::move(feats)), std::move(labels), num_classes,
          fmt::format("synthetic-c{}-n{}-d{}-s{}", num_classes, per_class, dim, noise_sigma),
          seed};
}

void write_features_binary(const fs::path& path, const Tensor& features) {
  const std::size_t n = features.rows(), d = features.cols();
  std::string bytes(kMagic.begin(), kMagic.end());
  put_u32(bytes, static_cast<std::uint32_t>(n));
  put_u32(bytes, static_cast<std::uint32_t>(d));
  bytes.reserve(kHeaderBytes + 4 * n * d);
  for (double v : features.values()) put_u32(bytes, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  write_file(path, bytes);
}

Tensor read_features_binary(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < kHeaderBytes) {
    throw FormatError(fmt::format("{}: truncated header at byte offset {}", path.string(),
                                  bytes.size()));
  }
  if (!has_magic(bytes)) {
    throw FormatError(fmt::format("{}: bad magic at byte offset 0", path.string()));
  }
  const std::size_t n = get_u32(bytes, 4), d = get_u32(bytes, 8);
  if (n == 0) throw EmptySetError(path.string() + ": dataset has zero samples");
  if (d == 0) throw FormatError(fmt::format("{}: zero dimension at byte offset 8", path.string()));
  const std::size_t expected = kHeaderBytes + 4 * n * d;
  if (bytes.size() != expected) {
    throw FormatError(fmt::format("{}: payload ends at byte offset {}, header declares {}",
                                  path.string(), bytes.size(), expected));
  }
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < n * d; ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i)));
  }
  return Tensor({n, d}, std::move(values));
}

void write_features_csv(const fs::path& path, const Tensor& features) {
  std::string out;
  const std::size_t n = features.rows(), d = features.cols();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (j) out.push_back(',');
      out += fmt::format("{:.17g}", features.at(i, j));
    }
    out.push_back('\n');
  }
  write_file(path, out);
}

Tensor read_features_csv(const fs::path& path) {
  const auto rows = parse_csv(read_file(path), path);
  if (rows.empty()) throw EmptySetError(path.string() + ": dataset has zero samples");
  const std::size_t n = rows.size(), d = rows.front().size();
  std::vector<double> values;
  values.reserve(n * d);
  for (const auto& row : rows) values.insert(values.end(), row.begin(), row.end());
  return Tensor({n, d}, std::move(values));
}

void write_labels_csv(const fs::path& path, const std::vector<int>& labels) {
  std::string out;
  for (int l : labels) out += fmt::format("{}\n", l);
  write_file(path, out);
}

std::vector<int> read_labels_csv(const fs::path& path) {
  const auto rows = parse_csv(read_file(path), path);
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != 1) {
      throw FormatError(fmt::format("{}: row {} has {} columns, expected 1", path.string(), i + 1,
                                    rows[i].size()));
    }
    const double v = rows[i][0];
    if (v < 0 || v != std::floor(v) || v > 2147483647.0) {
      throw FormatError(
          fmt::format("{}: row {} is not a non-negative integer label", path.string(), i + 1));
    }
    labels.push_back(static_cast<int>(v));
  }
  return labels;
}

LabeledDataset load_dataset(const fs::path& features_path, const fs::path& labels_path) {
  Tensor features;
  {
    std::ifstream probe(features_path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + features_path.string());
    std::array<char, 4> head{};
    probe.read(head.data(), head.size());
    const bool binary = probe.gcount() == 4 && head == kMagic;
    features = binary ? read_features_binary(features_path) : read_features_csv(features_path);
  }
  auto labels = read_labels_csv(labels_path);
  if (labels.size() != features.rows()) {
    throw FormatError(fmt::format("row-count mismatch: {} has {} rows, {} has {}",
                                  features_path.string(), features.rows(), labels_path.string(),
                                  labels.size()));
  }

  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  int next = 0;
  bool contiguous = true;
  for (auto& [orig, dense] : remap) {
    dense = next++;
    contiguous = contiguous && orig == dense;
  }
  if (!contiguous) {
    std::string table;
    for (const auto& [orig, dense] : remap) table += fmt::format(" {}->{}", orig, dense);
    spdlog::warn("{}: labels are not contiguous, remapped:{}", labels_path.string(), table);
    for (int& l : labels) l = remap.at(l);
  }

  LabeledDataset ds;
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  ds.class_count = next;
  ds.name = features_path.stem().string();
  ds.seed = 0;
  return ds;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double val_fraction,
                                                std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("split: val_fraction must lie in (0, 1)");
  }
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(ds.class_count));
  for (std::size_t i = 0; i < ds.size(); ++i) by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx, val_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2) {
      if (members.size() == 1) {
        spdlog::warn("split: class {} has a single sample; it stays in the training split", c);
      }
      train_idx.insert(train_idx.end(), members.begin(), members.end());
      continue;
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto take = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(members.size())));
    take = std::min(take, members.size() - 1);
    val_idx.insert(val_idx.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    train_idx.insert(train_idx.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
  auto train = ds.subset(train_idx);
  auto val = ds.subset(val_idx);
  train.name = ds.name + "/train";
  val.name = ds.name + "/val";
  return {std::move(train), std::move(val)};
}

void write_metadata_json(const fs::path& path, const LabeledDataset& ds) {
  nlohmann::ordered_json meta;
  meta["name"] = ds.name;
  meta["n"] = ds.size();
  meta["dim"] = ds.dim();
  meta["C"] = ds.class_count;
  meta["seed"] = ds.seed;
  write_file(path, meta.dump(2) + "\n");
}

}  // namespace pdl
