#pragma once

// Non-differentiable analysis of embedding spaces: decidability index,
// genuine/impostor score distributions, histograms and Recall@K.

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pdl/tensor.hpp"

namespace pdl {

enum class ScoreKind { similarity, distance };

struct ScoreSet {
  std::vector<double> genuine;
  std::vector<double> impostor;
  ScoreKind kind = ScoreKind::distance;
};

struct MomentSummary {
  double mean = 0.0;
  double variance = 0.0;  // population
};

MomentSummary moments(std::span<const double> values);

/// d′ = |μ_i − μ_g| / sqrt((σ²_g + σ²_i)/2) with population variances.
/// Returns +∞ when both variances are 0 and the means differ, 0 when the
/// means are equal. Throws InsufficientDataError if a set has < 2 scores.
double decidability_index(const ScoreSet& s);

/// Scores of every i<j pair of rows of Z: cosine similarity, or cosine
/// distance 1 − cos for ScoreKind::distance.
ScoreSet genuine_impostor_scores(const Tensor& z, std::span<const int> labels, ScoreKind kind);

struct RecallReport {
  std::vector<int> k_values;
  std::map<int, double> recall;
  std::size_t num_queries = 0;
  std::size_t num_excluded = 0;  // queries whose class has a single member
};

/// Each sample queries all others ranked by cosine distance (ties by index);
/// recall[k] is the fraction of queries with a same-class sample in the top k.
RecallReport recall_at_k(const Tensor& z, std::span<const int> labels,
                         std::span<const int> k_values);

struct Histogram {
  std::vector<double> edges;  // num_bins + 1
  std::vector<std::size_t> counts;
};

/// Uniform bins over [lo, hi], half-open except the last; out-of-range
/// scores are clamped into the edge bins.
Histogram histogram(std::span<const double> scores, int num_bins, double lo, double hi);

struct AnalysisOptions {
  int num_bins = 50;
  double lo = 0.0;
  double hi = 2.0;
  std::vector<int> k_values{1, 2, 4, 8};
};

/// The `analyze` document: d′, per-set mean/std/histogram of cosine
/// distances, Recall@K and the sample count.
nlohmann::ordered_json analyze(const Tensor& z, std::span<const int> labels,
                               const AnalysisOptions& options);

nlohmann::ordered_json to_json(const RecallReport& report);

}  // namespace pdl
