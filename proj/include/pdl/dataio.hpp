#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "pdl/tensor.hpp"

namespace pdl {

struct LabeledDataset {
  Tensor features;            // n × input_dim
  std::vector<int> labels;    // n entries in [0, class_count)
  int class_count = 0;
  std::string name;
  std::uint64_t seed = 0;     // 0 for ingested data

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols(); }

  /// Rows `indices` as a new dataset with the same class_count.
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
};

/// Spherical class clusters: C directions uniform on the unit sphere, each
/// sample = direction + noise_sigma · N(0, I).
LabeledDataset gen_synthetic(int num_classes, int per_class, int dim, double noise_sigma,
                             std::uint64_t seed);

/// Features from CSV or a PDL1 binary file (detected by magic), labels from a
/// single-column CSV. Non-contiguous labels are remapped to 0..C-1 with a
/// warning.
LabeledDataset load_dataset(const std::filesystem::path& features_path,
                            const std::filesystem::path& labels_path);

/// Stratified split: ceil(val_fraction · n_c) samples of each class go to
/// validation, capped so training keeps at least one.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& ds, double val_fraction,
                                                std::uint64_t seed);

// File formats.

/// "PDL1", u32 n, u32 dim, then n·dim little-endian f32 row-major.
void write_features_binary(const std::filesystem::path& path, const Tensor& features);
Tensor read_features_binary(const std::filesystem::path& path);

void write_features_csv(const std::filesystem::path& path, const Tensor& features);
Tensor read_features_csv(const std::filesystem::path& path);

void write_labels_csv(const std::filesystem::path& path, const std::vector<int>& labels);
std::vector<int> read_labels_csv(const std::filesystem::path& path);

/// {name, n, dim, C, seed}
void write_metadata_json(const std::filesystem::path& path, const LabeledDataset& ds);

}  // namespace pdl
