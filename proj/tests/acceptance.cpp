// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <fmt/core.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>

#include "helpers.hpp"
#include "pdl/dataio.hpp"
#include "pdl/error.hpp"
#include "pdl/gradcheck.hpp"
#include "pdl/losses.hpp"
#include "pdl/stats_eval.hpp"
#include "pdl/trainer.hpp"

using namespace pdl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void run(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, fmt::format("unexpected exception: {}", e.what())};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs >= budget_s) {
    o.pass = false;
    o.detail += fmt::format("; over time budget {:.0f}s", budget_s);
  }
  if (!o.pass) ++failures;
  fmt::print("criterion {}: {} [{}] {} ({:.2f}s)\n", id, o.pass ? "PASS" : "FAIL", title, o.detail,
             secs);
  std::fflush(stdout);
}

/// Samples with exactly the requested population mean and standard deviation.
std::vector<double> with_moments(std::mt19937_64& rng, std::size_t n, double mu, double sd) {
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  const double m = oracle::mean(v), s = std::sqrt(oracle::pop_variance(v));
  for (auto& x : v) x = mu + sd * (x - m) / s;
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct RunResult {
  double d_initial = 0.0;
  double d_final = 0.0;
  double r1 = 0.0;
  std::string error;
  int error_epoch = -1;
};

const LabeledDataset& synthetic_full() {
  static const LabeledDataset ds = gen_synthetic(10, 50, 32, 0.5, 0);
  return ds;
}

RunResult train_synthetic(LossKind loss, int batch_size) {
  const auto [train, val] = split(synthetic_full(), 0.1, 0);
  TrainConfig cfg;
  cfg.loss = loss;
  cfg.epochs = 100;
  cfg.batch_size = batch_size;
  cfg.loss_config.tau = 1.0;
  cfg.proxy_init = ProxyInit::random;
  cfg.eval_every = 100;
  cfg.k_values = {1};
  const MlpConfig mlp{32, {64}, 32, Activation::relu, 0};
  RunResult r;
  int epoch = 0;
  FitHooks hooks;
  hooks.on_step = [&](const StepInfo& s) { epoch = s.epoch; };
  try {
    const FitResult fr = fit(cfg, mlp, train, &val, hooks);
    r.d_initial = fr.initial_validation->d_prime;
    const auto& last = fr.logs.back().validation;
    r.d_final = last->d_prime;
    r.r1 = last->recall.at(1);
  } catch (const BatchCompositionError& e) {
    r.error = e.what();
    r.error_epoch = epoch;
  }
  return r;
}

Outcome criterion1() {
  std::mt19937_64 rng(1);
  ScoreSet s;
  s.genuine = with_moments(rng, 1000, 0.47, 0.22);
  s.impostor = with_moments(rng, 5000, 0.82, 0.04);
  const double d = decidability_index(s);
  return {std::abs(d - 2.21) <= 0.03, fmt::format("d'={:.4f}, target 2.21 +- 0.03", d)};
}

Outcome criterion2() {
  const auto names = gradient_check_names();
  for (const char* pipeline : {"pd_loss_pipeline", "d_loss_pipeline", "proxy_nca_pipeline", "triplet_pipeline"}) {
    if (std::find(names.begin(), names.end(), pipeline) == names.end())
      return {false, fmt::format("missing check {}", pipeline)};
  }
  const auto results = run_gradient_suite(0, 5, 1e-5);
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    if (!(r.max_rel_error <= worst)) {
      worst = r.max_rel_error;
      worst_name = fmt::format("{} seed {}", r.name, r.seed);
    }
  }
  return {worst < 1e-4 && results.size() == names.size() * 5,
          fmt::format("{} checks x 5 seeds, worst {:.2e} ({})", names.size(), worst, worst_name)};
}

Outcome criterion3() {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  bool recall_exact = true;
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(4, 64)(rng);
    const int classes = std::uniform_int_distribution<int>(2, 6)(rng);
    const std::size_t dim = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    auto zm = oracle::random_matrix(rng, n, dim);
    for (auto& row : zm) row = oracle::unit(row);
    std::vector<int> labels = oracle::random_labels(rng, n, classes);
    // Guarantee a genuine and an impostor pair.
    labels[0] = 0;
    labels[1] = 0;
    labels[2] = 1;
    const Tensor z = testing::to_tensor(zm);

    worst = std::max(worst, std::abs(d_loss_batch(z, labels, 1e-6).item() -
                                     oracle::d_loss(zm, labels, 1e-6)));
    worst = std::max(worst, std::abs(triplet_loss_batch_all(z, labels, 0.2).item() -
                                     oracle::triplet(zm, labels, 0.2)));
    for (bool distance : {false, true}) {
      const ScoreSet s = genuine_impostor_scores(
          z, labels, distance ? ScoreKind::distance : ScoreKind::similarity);
      const oracle::Pairs p = oracle::pair_scores(zm, labels, distance);
      worst = std::max({worst, max_abs_diff(s.genuine, p.genuine), max_abs_diff(s.impostor, p.impostor)});
    }
    std::vector<int> ks{1, 2, 3};
    const RecallReport rep = recall_at_k(z, labels, ks);
    const auto expected = oracle::recall(zm, labels, ks);
    for (int k : ks) recall_exact = recall_exact && rep.recall.at(k) == expected.at(k);
  }
  return {worst <= 1e-10 && recall_exact,
          fmt::format("20 instances, max deviation {:.2e}, recall {}", worst,
                      recall_exact ? "exact" : "mismatch")};
}

Outcome criterion4() {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::size_t b = std::uniform_int_distribution<std::size_t>(1, 64)(rng);
    const int c = std::uniform_int_distribution<int>(2, 40)(rng);
    auto zm = oracle::random_matrix(rng, b, 8);
    const ProxyBank bank = init_random(c, 8, rng());
    const auto labels = oracle::random_labels(rng, b, c);
    const Tensor s = scaled_similarities(testing::to_tensor(zm), bank, 1.0);
    const SimilarityPartition p = partition_similarities(s, labels);
    if (p.s_gen.size() != b || p.s_imp.size() != b * static_cast<std::size_t>(c - 1))
      return {false, fmt::format("|B|={} C={}: got {} and {}", b, c, p.s_gen.size(), p.s_imp.size())};
  }
  return {true, "50 configurations"};
}

Outcome criterion5() {
  const RunResult r = train_synthetic(LossKind::pd, 32);
  const double gain = r.d_final - r.d_initial;
  return {gain >= 1.0 && r.r1 >= 0.9,
          fmt::format("val d' {:.3f} -> {:.3f} (gain {:.3f}, need >= 1.0), R@1 {:.3f} (need >= 0.9)",
                      r.d_initial, r.d_final, gain, r.r1)};
}

Outcome criterion6() {
  std::string detail;
  bool pd_ok = true;
  double pd_r1_at_8 = 0.0;
  for (int b : {8, 32, 64}) {
    const RunResult r = train_synthetic(LossKind::pd, b);
    if (b == 8) pd_r1_at_8 = r.r1;
    pd_ok = pd_ok && r.error.empty() && r.r1 >= 0.85;
    detail += fmt::format("PD batch {} R@1 {:.3f}; ", b, r.r1);
  }
  const RunResult d = train_synthetic(LossKind::dloss, 8);
  bool d_ok = false;
  if (!d.error.empty()) {
    d_ok = d.error_epoch < 10;
    detail += fmt::format("D-Loss batch 8 raised in epoch {}", d.error_epoch);
  } else {
    d_ok = d.r1 <= pd_r1_at_8 - 0.05;
    detail += fmt::format("D-Loss batch 8 trained to R@1 {:.3f}", d.r1);
  }
  detail += fmt::format(" (PD >= 0.85: {}, D-Loss condition: {})", pd_ok ? "met" : "not met",
                        d_ok ? "met" : "not met");
  return {pd_ok && d_ok, detail};
}

Outcome criterion7() {
  const double eps = 1e-6;
  auto loss = [&](double mg, double vg, double mi, double vi) {
    return pd_loss({Tensor::scalar(mg), Tensor::scalar(vg), Tensor::scalar(mi), Tensor::scalar(vi)},
                   eps, eps)
        .item();
  };
  double prev = INFINITY;
  for (int k = 0; k < 20; ++k) {
    const double v = loss(0.2 + 0.035 * k, 0.05, 0.1, 0.05);
    if (!(v < prev)) return {false, fmt::format("mu_gen sweep not decreasing at point {}", k)};
    prev = v;
  }
  prev = -INFINITY;
  for (int k = 0; k < 20; ++k) {
    const double v = loss(0.6, 0.01 + 0.02 * k, 0.1, 0.05);
    if (!(v > prev)) return {false, fmt::format("var_gen sweep not increasing at point {}", k)};
    prev = v;
  }
  return {true, "both 20-point sweeps strictly monotone"};
}

Outcome criterion8() {
  const fs::path dir = testing::scratch_dir("acceptance_determinism");
  const LabeledDataset ds = gen_synthetic(10, 50, 32, 0.5, 0);
  write_features_binary(dir / "features.pdl1", ds.features);
  write_labels_csv(dir / "labels.csv", ds.labels);
  std::ofstream(dir / "experiment.json") << R"({
  "data": {"features": "features.pdl1", "labels": "labels.csv"},
  "model": {"input_dim": 32, "hidden_dims": [64], "embedding_dim": 32},
  "train": {"loss": "pd", "epochs": 100, "batch_size": 32, "seed": 7}
})";
  auto read = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  };
  std::string logs[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path out = dir / fmt::format("run{}", i);
    const std::string cmd = fmt::format("\"{}\" --quiet --out-dir \"{}\" train \"{}\"", PDL_CLI_PATH,
                                        out.string(), (dir / "experiment.json").string());
    if (const int rc = std::system(cmd.c_str()); rc != 0)
      return {false, fmt::format("pdl train exited with {}", rc)};
    logs[i] = read(out / "metrics.jsonl");
  }
  const auto lines = std::count(logs[0].begin(), logs[0].end(), '\n');
  fs::remove_all(dir);
  return {!logs[0].empty() && logs[0] == logs[1],
          fmt::format("metrics.jsonl {} across two runs ({} lines)",
                      logs[0] == logs[1] ? "byte-identical" : "differs", lines)};
}

Outcome criterion9() {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.3, 0.2);
  double spread = 0.0, min_gap = INFINITY;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> g(std::uniform_int_distribution<int>(2, 40)(rng)),
        im(std::uniform_int_distribution<int>(2, 200)(rng));
    for (auto& x : g) x = nd(rng) + 0.3;
    for (auto& x : im) x = nd(rng);
    std::vector<double> d, l;
    for (double tau : {0.1, 0.5, 1.0}) {
      ScoreSet s;
      std::vector<double> gs = g, is = im;
      for (auto& x : gs) x /= tau;
      for (auto& x : is) x /= tau;
      s.genuine = gs;
      s.impostor = is;
      d.push_back(decidability_index(s));
      const SimilarityPartition p{Tensor::vector(gs), Tensor::vector(is)};
      l.push_back(pd_loss(batch_stats(p), 1e-6, 1e-6).item());
    }
    spread = std::max({spread, std::abs(d[0] - d[1]), std::abs(d[0] - d[2]), std::abs(d[1] - d[2])});
    min_gap = std::min({min_gap, std::abs(l[0] - l[1]), std::abs(l[0] - l[2]), std::abs(l[1] - l[2])});
  }
  return {spread <= 1e-10 && min_gap > 0.0,
          fmt::format("d' spread {:.2e}, smallest PD-Loss gap {:.3e}", spread, min_gap)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  run(1, "d' arithmetic", 1, criterion1);
  run(2, "gradient suite", 30, criterion2);
  run(3, "oracle equivalence", 30, criterion3);
  run(4, "set cardinality", 5, criterion4);
  run(5, "end-to-end separability", 120, criterion5);
  run(6, "batch-size robustness", 360, criterion6);
  run(7, "monotonicity", 1, criterion7);
  run(8, "determinism", 240, criterion8);
  run(9, "tau invariance", 1, criterion9);
  fmt::print("{} of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
