#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "oracles.hpp"
#include "pdl/tensor.hpp"

namespace testing {

inline pdl::Tensor to_tensor(const oracle::Matrix& m) {
  std::vector<double> flat;
  for (const auto& r : m) flat.insert(flat.end(), r.begin(), r.end());
  return pdl::Tensor({m.size(), m.empty() ? 0 : m[0].size()}, std::move(flat));
}

inline oracle::Matrix to_matrix(const pdl::Tensor& t) {
  oracle::Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t i = 0; i < t.rows(); ++i)
    for (std::size_t j = 0; j < t.cols(); ++j) m[i][j] = t.at(i, j);
  return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pdl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
