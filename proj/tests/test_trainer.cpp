#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "pdl/error.hpp"
#include "pdl/optim.hpp"
#include "pdl/trainer.hpp"

using namespace pdl;

TEST_CASE("cosine annealing") {
  CHECK(cosine_anneal_lr(0.1, 0, 10) == 0.1);
  CHECK(cosine_anneal_lr(0.1, 5, 10) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(cosine_anneal_lr(1.0, 499, 500) ==
        doctest::Approx(0.5 * (1.0 + std::cos(std::numbers::pi * 499.0 / 500.0))).epsilon(1e-12));
  CHECK(cosine_anneal_lr(1.0, 499, 500) == doctest::Approx(9.87e-6).epsilon(1e-3));
  CHECK(cosine_anneal_lr(1.0, 499, 500) >= 0.0);
  CHECK_THROWS_AS(cosine_anneal_lr(1.0, 10, 10), ContractError);
  CHECK_THROWS_AS(cosine_anneal_lr(1.0, -1, 10), ContractError);
}

TEST_CASE("gradient clipping") {
  SUBCASE("under the threshold") {
    ParamGrads g{{0.3}, {0.4}};
    const ClipResult r = clip_grad_norm(g, 1.0);
    CHECK(r.scale == 1.0);
    CHECK(r.norm_before == doctest::Approx(0.5));
    CHECK(g == ParamGrads{{0.3}, {0.4}});
  }
  SUBCASE("exact scaling over all buffers jointly") {
    ParamGrads g{{2.4, 0.0}, {3.2}};
    const ClipResult r = clip_grad_norm(g, 1.0);
    CHECK(r.scale == doctest::Approx(0.25));
    CHECK(std::abs(global_norm(g) - 1.0) < 1e-12);
  }
  SUBCASE("post-clip norm is min(norm, max)") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    for (int t = 0; t < 50; ++t) {
      ParamGrads g(3);
      for (auto& b : g) {
        b.resize(7);
        for (auto& x : b) x = d(rng) * (t % 5) * 0.2;
      }
      const double before = global_norm(g);
      clip_grad_norm(g, 1.0);
      CHECK(std::abs(global_norm(g) - std::min(before, 1.0)) < 1e-10);
    }
  }
  SUBCASE("non-positive max norm") {
    ParamGrads g{{1.0}};
    CHECK_THROWS_AS(clip_grad_norm(g, 0.0), ContractError);
  }
}

TEST_CASE("AdamW") {
  const std::size_t sizes[] = {2};

  SUBCASE("zero gradient without decay is a fixed point") {
    Tensor p = Tensor::vector({1.5, -2.0});
    AdamW opt(sizes);
    Tensor* params[] = {&p};
    opt.step(params, {{0.0, 0.0}}, 0.1, 0.0);
    CHECK(p[0] == 1.5);
    CHECK(p[1] == -2.0);
  }
  SUBCASE("pure decay") {
    Tensor p = Tensor::vector({1.0, -2.0});
    AdamW opt(sizes);
    Tensor* params[] = {&p};
    opt.step(params, {{0.0, 0.0}}, 1.0, 0.1);
    CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-1.8).epsilon(1e-15));
  }
  SUBCASE("scalar recurrence over three steps") {
    const std::size_t one[] = {1};
    Tensor p = Tensor::vector({0.7});
    AdamW opt(one);
    Tensor* params[] = {&p};
    const double g = 0.3, lr = 0.01, wd = 0.05;
    double theta = 0.7, m = 0.0, v = 0.0;
    for (int t = 1; t <= 3; ++t) {
      opt.step(params, {{g}}, lr, wd);
      theta -= lr * wd * theta;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
      theta -= lr * mh / (std::sqrt(vh) + 1e-8);
      CHECK(std::abs(p[0] - theta) < 1e-12);
    }
    CHECK(opt.state().step == 3);
  }
  SUBCASE("shape mismatch") {
    Tensor p = Tensor::vector({1.0, 2.0});
    AdamW opt(sizes);
    Tensor* params[] = {&p};
    CHECK_THROWS_AS(opt.step(params, {{0.0}}, 0.1, 0.0), ContractError);
  }
  SUBCASE("keeps the requires_grad flag") {
    Tensor p({2}, {1.0, 2.0}, true);
    AdamW opt(sizes);
    Tensor* params[] = {&p};
    opt.step(params, {{0.1, 0.1}}, 0.1, 0.0);
    CHECK(p.requires_grad());
  }
}

TEST_CASE("batch sampling") {
  SUBCASE("uniform drops the remainder") {
    std::vector<int> labels(10, 0);
    const auto b = sample_batches(labels, 3, {}, 0, 0);
    REQUIRE(b.size() == 3);
    std::set<std::size_t> seen;
    for (const auto& batch : b) {
      CHECK(batch.size() == 3);
      seen.insert(batch.begin(), batch.end());
    }
    CHECK(seen.size() == 9);
  }
  SUBCASE("class balanced P x K") {
    std::vector<int> labels;
    for (int c = 0; c < 19; ++c)
      for (int k = 0; k < 10; ++k) labels.push_back(c);
    const SamplerConfig s{SamplerKind::class_balanced, 4, 8};
    const auto batches = sample_batches(labels, 32, s, 5, 2);
    CHECK(batches.size() == labels.size() / 32);
    for (const auto& batch : batches) {
      std::map<int, int> counts;
      for (auto i : batch) ++counts[labels[i]];
      CHECK(counts.size() == 4);
      for (const auto& [c, n] : counts) CHECK(n == 8);
      CHECK(std::set<std::size_t>(batch.begin(), batch.end()).size() == 32);
    }
  }
  SUBCASE("small classes are drawn with replacement") {
    const std::vector<int> labels{0, 0, 1, 1, 2, 2};
    const auto batches = sample_batches(labels, 6, {SamplerKind::class_balanced, 2, 3}, 1, 0);
    for (const auto& batch : batches) {
      std::map<int, int> counts;
      for (auto i : batch) ++counts[labels[i]];
      CHECK(counts.size() == 2);
    }
  }
  SUBCASE("deterministic per (seed, epoch)") {
    std::vector<int> labels(50);
    for (int i = 0; i < 50; ++i) labels[static_cast<std::size_t>(i)] = i % 5;
    CHECK(sample_batches(labels, 8, {}, 3, 1) == sample_batches(labels, 8, {}, 3, 1));
    CHECK(sample_batches(labels, 8, {}, 3, 1) != sample_batches(labels, 8, {}, 3, 2));
    const SamplerConfig s{SamplerKind::class_balanced, 2, 4};
    CHECK(sample_batches(labels, 8, s, 3, 1) == sample_batches(labels, 8, s, 3, 1));
  }
  SUBCASE("errors") {
    const std::vector<int> labels{0, 0, 1, 1};
    CHECK_THROWS_AS(sample_batches(labels, 5, {}, 0, 0), SamplerError);
    CHECK_THROWS_AS(sample_batches(labels, 4, {SamplerKind::class_balanced, 4, 1}, 0, 0),
                    SamplerError);
  }
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK(cfg.epochs == 100);
  CHECK(cfg.base_lr == 1e-3);
  CHECK(cfg.weight_decay == 1e-4);
  CHECK(cfg.clip_max_norm == 1.0);
  cfg.validate();
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.batch_size = 32;
  cfg.proxy_lr_multiplier = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.proxy_lr_multiplier = 1.0;
  cfg.sampler = {SamplerKind::class_balanced, 4, 4};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

namespace {

LabeledDataset toy_data() { return gen_synthetic(4, 12, 6, 0.2, 17); }

MlpConfig toy_model() { return {6, {8}, 4, Activation::relu, 3}; }

TrainConfig toy_train() {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  cfg.base_lr = 1e-2;
  return cfg;
}

}  // namespace

TEST_CASE("fit") {
  const LabeledDataset data = toy_data();

  SUBCASE("lr 0 without decay leaves parameters unchanged") {
    TrainConfig cfg = toy_train();
    cfg.epochs = 1;
    cfg.base_lr = 0.0;
    cfg.weight_decay = 0.0;
    const MlpParams before = init_params(toy_model());
    const FitResult r = fit(cfg, toy_model(), data, nullptr);
    for (std::size_t l = 0; l < before.layers.size(); ++l)
      for (std::size_t i = 0; i < before.layers[l].weight.size(); ++i)
        CHECK(r.params.layers[l].weight[i] == before.layers[l].weight[i]);
  }
  SUBCASE("logged lr follows the schedule and clipping holds each step") {
    TrainConfig cfg = toy_train();
    cfg.clip_max_norm = 0.05;
    FitHooks hooks;
    std::size_t steps = 0;
    hooks.on_step = [&](const StepInfo& s) {
      ++steps;
      CHECK(s.grad_norm_after <= cfg.clip_max_norm + 1e-10);
      CHECK(std::isfinite(s.loss));
    };
    const FitResult r = fit(cfg, toy_model(), data, &data, hooks);
    REQUIRE(r.logs.size() == 3);
    for (const auto& log : r.logs) {
      CHECK(log.lr == cosine_anneal_lr(cfg.base_lr, log.epoch, cfg.epochs));
      CHECK(log.validation.has_value());
    }
    CHECK(steps == 3 * (48 / 8));
    CHECK(r.initial_validation.has_value());
  }
  SUBCASE("deterministic") {
    const FitResult a = fit(toy_train(), toy_model(), data, nullptr);
    const FitResult b = fit(toy_train(), toy_model(), data, nullptr);
    for (std::size_t e = 0; e < a.logs.size(); ++e) CHECK(a.logs[e].mean_loss == b.logs[e].mean_loss);
    std::vector<double> la, lb;
    FitHooks ha, hb;
    ha.on_step = [&](const StepInfo& s) { la.push_back(s.loss); };
    hb.on_step = [&](const StepInfo& s) { lb.push_back(s.loss); };
    fit(toy_train(), toy_model(), data, nullptr, ha);
    fit(toy_train(), toy_model(), data, nullptr, hb);
    REQUIRE(la.size() >= 10);
    CHECK(la == lb);
  }
  SUBCASE("every loss trains") {
    for (auto kind : {LossKind::pd, LossKind::dloss, LossKind::proxynca, LossKind::triplet}) {
      TrainConfig cfg = toy_train();
      cfg.loss = kind;
      cfg.sampler = {SamplerKind::class_balanced, 2, 4};
      CAPTURE(to_string(kind));
      const FitResult r = fit(cfg, toy_model(), data, &data);
      for (const auto& log : r.logs) CHECK(std::isfinite(log.mean_loss));
    }
  }
  SUBCASE("precomputed proxy init") {
    TrainConfig cfg = toy_train();
    cfg.proxy_init = ProxyInit::precomputed;
    const FitResult r = fit(cfg, toy_model(), data, nullptr);
    CHECK(r.bank.init_kind == ProxyInit::precomputed);
  }
  SUBCASE("pair losses leave the proxies alone") {
    TrainConfig cfg = toy_train();
    cfg.loss = LossKind::triplet;
    cfg.sampler = {SamplerKind::class_balanced, 2, 4};
    const TrainState s = make_train_state(cfg, toy_model(), data);
    const FitResult r = fit(cfg, toy_model(), data, nullptr);
    for (std::size_t i = 0; i < s.bank.proxies.size(); ++i) CHECK(r.bank.proxies[i] == s.bank.proxies[i]);
  }
  SUBCASE("D-Loss batch without genuine pairs names the batch") {
    TrainConfig cfg = toy_train();
    cfg.loss = LossKind::dloss;
    cfg.batch_size = 2;
    cfg.epochs = 5;
    try {
      fit(cfg, toy_model(), data, nullptr);
      FAIL("expected BatchCompositionError");
    } catch (const BatchCompositionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("epoch") != std::string::npos);
      CHECK(msg.find("pairs in") != std::string::npos);
    }
  }
  SUBCASE("dimension mismatch") {
    MlpConfig m = toy_model();
    m.input_dim = 5;
    CHECK_THROWS_AS(fit(toy_train(), m, data, nullptr), DimensionError);
  }
}

TEST_CASE("proxy learning-rate multiplier") {
  // Frozen backbone: compare the proxy update against AdamW at lr·m.
  const LabeledDataset data = toy_data();
  TrainConfig cfg = toy_train();
  cfg.proxy_lr_multiplier = 10.0;
  cfg.clip_max_norm = 1e9;
  TrainState state = make_train_state(cfg, toy_model(), data);
  const ProxyBank before = state.bank;
  std::vector<double> proxy_grad;
  FitHooks hooks;
  hooks.on_step = [&](const StepInfo& s) { proxy_grad = s.grads->back(); };
  const std::vector<std::size_t> batch{0, 1, 2, 3, 12, 13, 24, 36};
  train_step(state, data, batch, 1e-3, 0, hooks);

  Tensor expected = before.proxies;
  const std::size_t sizes[] = {expected.size()};
  AdamW ref(sizes);
  Tensor* p[] = {&expected};
  ref.step(p, {proxy_grad}, 1e-3 * 10.0, cfg.weight_decay);
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(state.bank.proxies[i] == expected[i]);
}

TEST_CASE("evaluate on perfectly separated data") {
  const LabeledDataset data = gen_synthetic(3, 6, 4, 0.0, 2);
  MlpParams p = init_params({4, {}, 4, Activation::relu, 1});
  p.layers[0].weight = Tensor({4, 4}, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1}, true);
  const int ks[] = {1};
  const ValidationMetrics m = evaluate(p, data, ks);
  CHECK(m.recall.at(1) == 1.0);
  const auto pairs = oracle::pair_scores(testing::to_matrix(data.features), data.labels, true);
  CHECK(m.d_prime == doctest::Approx(oracle::d_prime(pairs.genuine, pairs.impostor)).epsilon(1e-9));
}
