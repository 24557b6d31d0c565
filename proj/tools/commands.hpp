#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pdl::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2 };

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out_dir;
  bool quiet = false;
};

struct GenDataOptions {
  int classes = 10;
  int per_class = 50;
  int dim = 32;
  double sigma = 0.3;
  std::uint64_t seed = 0;
  std::filesystem::path out = "data";
};

struct TrainOptions {
  std::filesystem::path experiment;
};

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::vector<int> k_values{1, 2, 4, 8};
  std::optional<std::filesystem::path> out;
};

struct AnalyzeOptions {
  EvalOptions eval;
  int bins = 50;
  std::vector<double> range{0.0, 2.0};
};

struct GradcheckOptions {
  std::uint64_t seed = 0;
  int seeds = 5;
  double tolerance = 1e-4;
  double step = 1e-5;
};

int cmd_gen_data(const GenDataOptions& opts, const GlobalOptions& global);
int cmd_train(const TrainOptions& opts, const GlobalOptions& global);
int cmd_eval(const EvalOptions& opts, const GlobalOptions& global);
int cmd_analyze(const AnalyzeOptions& opts, const GlobalOptions& global);
int cmd_gradcheck(const GradcheckOptions& opts, const GlobalOptions& global);

}  // namespace pdl::cli
