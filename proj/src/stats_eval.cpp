#include "pdl/stats_eval.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdl/error.hpp"
#include "pdl/kernels.hpp"

namespace pdl {

MomentSummary moments(std::span<const double> values) {
  if (values.empty()) throw EmptySetError("moments: empty score list");
  const auto n = static_cast<double>(values.size());
  double mu = 0.0;
  for (double v : values) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : values) var += (v - mu) * (v - mu);
  return {mu, var / n};
}

double decidability_index(const ScoreSet& s) {
  if (s.genuine.size() < 2 || s.impostor.size() < 2) {
    throw InsufficientDataError(fmt::format(
        "decidability_index: need at least 2 scores per set, got {} genuine and {} impostor",
        s.genuine.size(), s.impostor.size()));
  }
  const auto g = moments(s.genuine);
  const auto i = moments(s.impostor);
  const double gap = std::abs(i.mean - g.mean);
  const double spread = std::sqrt((g.variance + i.variance) / 2.0);
  if (spread == 0.0) return gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return gap / spread;
}

ScoreSet genuine_impostor_scores(const Tensor& z, std::span<const int> labels, ScoreKind kind) {
  if (z.rank() != 2) throw DimensionError("genuine_impostor_scores: expected a matrix");
  const std::size_t n = z.rows();
  if (labels.size() != n) {
    throw DimensionError(fmt::format("genuine_impostor_scores: {} labels for {} rows",
                                     labels.size(), n));
  }
  if (n < 2) throw InsufficientDataError("genuine_impostor_scores: need at least 2 samples");

  const auto sim = kernels::cosine_similarity_matrix(z.values(), n, z.cols());
  ScoreSet out;
  out.kind = kind;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = sim[i * n + j];
      const double score = kind == ScoreKind::distance ? 1.0 - s : s;
      (labels[i] == labels[j] ? out.genuine : out.impostor).push_back(score);
    }
  }
  if (out.genuine.empty()) {
    throw BatchCompositionError("genuine_impostor_scores: genuine set is empty (every label distinct)");
  }
  if (out.impostor.empty()) {
    throw BatchCompositionError("genuine_impostor_scores: impostor set is empty (single class)");
  }
  return out;
}

RecallReport recall_at_k(const Tensor& z, std::span<const int> labels,
                         std::span<const int> k_values) {
  if (z.rank() != 2) throw DimensionError("recall_at_k: expected a matrix");
  const std::size_t n = z.rows();
  if (labels.size() != n) {
    throw DimensionError(fmt::format("recall_at_k: {} labels for {} rows", labels.size(), n));
  }
  if (k_values.empty()) throw ContractError("recall_at_k: no k values given");
  std::vector<int> ks(k_values.begin(), k_values.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.front() < 1) throw ContractError("recall_at_k: k must be at least 1");
  if (static_cast<std::size_t>(ks.back()) >= n) {
    throw ContractError(fmt::format("recall_at_k: k = {} needs more than {} samples", ks.back(), n));
  }

  std::map<int, std::size_t> class_sizes;
  for (int l : labels) ++class_sizes[l];

  auto dist = kernels::cosine_similarity_matrix(z.values(), n, z.cols());
  for (double& d : dist) d = 1.0 - d;
  const auto neighbors =
      kernels::nearest_neighbors(dist, n, static_cast<std::size_t>(ks.back()));

  RecallReport report;
  report.k_values = ks;
  std::vector<std::size_t> hits(ks.size(), 0);
  for (std::size_t q = 0; q < n; ++q) {
    if (class_sizes[labels[q]] < 2) {
      ++report.num_excluded;
      continue;
    }
    ++report.num_queries;
    // rank of the first same-class neighbour
    std::size_t first = neighbors[q].size();
    for (std::size_t r = 0; r < neighbors[q].size(); ++r) {
      if (labels[neighbors[q][r]] == labels[q]) {
        first = r;
        break;
      }
    }
    for (std::size_t t = 0; t < ks.size(); ++t) {
      if (first < static_cast<std::size_t>(ks[t])) ++hits[t];
    }
  }
  if (report.num_excluded > 0) {
    spdlog::warn("recall_at_k: {} queries excluded (their class has a single member)",
                 report.num_excluded);
  }
  if (report.num_queries == 0) {
    throw InsufficientDataError("recall_at_k: every class has a single member");
  }
  for (std::size_t t = 0; t < ks.size(); ++t) {
    report.recall[ks[t]] =
        static_cast<double>(hits[t]) / static_cast<double>(report.num_queries);
  }
  return report;
}

Histogram histogram(std::span<const double> scores, int num_bins, double lo, double hi) {
  if (num_bins < 1) throw ContractError("histogram: num_bins must be at least 1");
  if (!(lo < hi)) throw ContractError("histogram: range must satisfy lo < hi");
  if (scores.empty()) throw EmptySetError("histogram: no scores");
  const auto bins = static_cast<std::size_t>(num_bins);
  Histogram h;
  h.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(num_bins);
  }
  h.edges.back() = hi;
  h.counts.assign(bins, 0);
  for (double s : scores) {
    const double pos = (s - lo) / (hi - lo) * static_cast<double>(num_bins);
    std::size_t bin = 0;
    if (pos >= static_cast<double>(num_bins)) {
      bin = bins - 1;
    } else if (pos > 0.0) {
      bin = static_cast<std::size_t>(pos);
    }
    ++h.counts[bin];
  }
  return h;
}

nlohmann::ordered_json to_json(const RecallReport& report) {
  nlohmann::ordered_json j;
  j["k_values"] = report.k_values;
  nlohmann::ordered_json recall = nlohmann::ordered_json::object();
  for (int k : report.k_values) recall[std::to_string(k)] = report.recall.at(k);
  j["recall"] = recall;
  j["num_queries"] = report.num_queries;
  j["num_excluded"] = report.num_excluded;
  return j;
}

nlohmann::ordered_json analyze(const Tensor& z, std::span<const int> labels,
                               const AnalysisOptions& options) {
  const auto scores = genuine_impostor_scores(z, labels, ScoreKind::distance);
  auto describe = [&](const std::vector<double>& values) {
    const auto m = moments(values);
    const auto h = histogram(values, options.num_bins, options.lo, options.hi);
    nlohmann::ordered_json j;
    j["count"] = values.size();
    j["mean"] = m.mean;
    j["std"] = std::sqrt(m.variance);
    j["histogram"] = {{"edges", h.edges}, {"counts", h.counts}};
    return j;
  };

  nlohmann::ordered_json out;
  out["d_prime"] = decidability_index(scores);
  out["score_kind"] = "cosine_distance";
  out["genuine"] = describe(scores.genuine);
  out["impostor"] = describe(scores.impostor);
  out["recall"] = to_json(recall_at_k(z, labels, options.k_values));
  out["num_samples"] = z.rows();
  return out;
}

}  // namespace pdl
