#include "pdl/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

#include "pdl/backbone.hpp"
#include "pdl/error.hpp"
#include "pdl/losses.hpp"
#include "pdl/proxy_bank.hpp"

namespace pdl {

double finite_diff_check(const ScalarFn& f, const Tensor& x, double h) {
  const Tensor inputs[] = {x};
  return finite_diff_check([&f](std::span<const Tensor> xs) { return f(xs[0]); }, inputs, h);
}

double finite_diff_check(const MultiScalarFn& f, std::span<const Tensor> inputs, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractError("finite_diff_check: h outside [1e-7, 1e-3]");

  Tape tape;
  std::vector<Tensor> watched;
  for (const auto& x : inputs) watched.push_back(tape.watch(x));
  const Tensor loss = f(watched);
  const Gradients grads = tape.backward(loss);

  std::vector<Tensor> probe;
  for (const auto& x : inputs) probe.push_back(x.detach());

  double worst = 0.0;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto analytic = grads.of(watched[t]).values();
    const Tensor base = inputs[t].detach();
    std::vector<double> buf(base.values().begin(), base.values().end());
    for (std::size_t i = 0; i < buf.size(); ++i) {
      const double orig = buf[i];
      buf[i] = orig + h;
      probe[t] = Tensor(base.shape(), buf);
      const double up = f(probe).item();
      buf[i] = orig - h;
      probe[t] = Tensor(base.shape(), buf);
      const double down = f(probe).item();
      buf[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    probe[t] = base;
  }
  return worst;
}

namespace {

struct Instance {
  std::mt19937_64 rng;

  explicit Instance(std::uint64_t seed) : rng(seed) {}

  Tensor uniform(Shape shape, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = d(rng);
    return Tensor(std::move(shape), std::move(v));
  }

  /// Values with |x| in [0.1, 1] and random sign: away from relu/abs kinks.
  Tensor away_from_zero(Shape shape) {
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = sign(rng) ? mag(rng) : -mag(rng);
    return Tensor(std::move(shape), std::move(v));
  }

  /// Round-robin labels (every class present when n ≥ classes), shuffled.
  std::vector<int> labels(std::size_t n, int classes) {
    std::vector<int> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
    std::shuffle(out.begin(), out.end(), rng);
    return out;
  }
};

constexpr double kKinkMargin = 1e-3;

/// True when no first-layer pre-activation sits near 0 and every row keeps
/// an active unit (an all-dead row embeds to the zero vector).
bool clear_of_kinks(const MlpParams& params, const Tensor& x) {
  const Tensor pre = affine(x, params.layers.front().weight, params.layers.front().bias);
  for (std::size_t i = 0; i < pre.rows(); ++i) {
    bool active = false;
    for (std::size_t j = 0; j < pre.cols(); ++j) {
      const double v = pre.at(i, j);
      if (std::abs(v) < kKinkMargin) return false;
      active = active || v > 0.0;
    }
    if (!active) return false;
  }
  return true;
}

/// Smallest |hinge argument| over all valid triplets of unit rows.
double min_abs_triplet_margin(const Tensor& z, std::span<const int> labels, double alpha) {
  const Tensor g = matmul_nt(z, z);
  const std::size_t n = z.rows();
  double m = INFINITY;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        const double arg =
            g.at(p, p) - g.at(q, q) - 2.0 * g.at(a, p) + 2.0 * g.at(a, q) + alpha;
        m = std::min(m, std::abs(arg));
      }
    }
  return m;
}

/// sum(op(x) ⊙ R) for a fixed random R, so every output element matters.
Tensor weighted_sum(const Tensor& y, const Tensor& weights) { return sum(mul(y, weights)); }

using Check = std::pair<std::string, std::function<double(std::uint64_t, double)>>;

std::vector<Check> make_checks() {
  std::vector<Check> checks;

  checks.emplace_back("matmul", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor a = in.uniform({3, 2}, -1, 1), b = in.uniform({2, 4}, -1, 1);
    const Tensor r = in.uniform({3, 4}, -1, 1);
    const Tensor xs[] = {a, b};
    return finite_diff_check(
        [&](std::span<const Tensor> x) { return weighted_sum(matmul(x[0], x[1]), r); }, xs, h);
  });
  checks.emplace_back("matmul_nt", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor a = in.uniform({3, 5}, -1, 1), b = in.uniform({4, 5}, -1, 1);
    const Tensor r = in.uniform({3, 4}, -1, 1);
    const Tensor xs[] = {a, b};
    return finite_diff_check(
        [&](std::span<const Tensor> x) { return weighted_sum(matmul_nt(x[0], x[1]), r); }, xs, h);
  });
  checks.emplace_back("affine", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({4, 3}, -1, 1), w = in.uniform({3, 5}, -1, 1);
    const Tensor b = in.uniform({5}, -1, 1), r = in.uniform({4, 5}, -1, 1);
    const Tensor xs[] = {x, w, b};
    return finite_diff_check(
        [&](std::span<const Tensor> v) { return weighted_sum(affine(v[0], v[1], v[2]), r); }, xs,
        h);
  });
  checks.emplace_back("relu", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.away_from_zero({3, 4});
    const Tensor r = in.uniform({3, 4}, -1, 1);
    return finite_diff_check([&](const Tensor& v) { return weighted_sum(relu(v), r); }, x, h);
  });
  checks.emplace_back("l2_normalize_rows", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({4, 8}, -1, 1);
    const Tensor r = in.uniform({4, 8}, -1, 1);
    return finite_diff_check(
        [&](const Tensor& v) { return weighted_sum(l2_normalize_rows(v, kNormalizeEps), r); }, x,
        h);
  });
  checks.emplace_back("mean", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({16}, -1, 1);
    return finite_diff_check([](const Tensor& v) { return mean(v); }, x, h);
  });
  checks.emplace_back("variance", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({16}, -1, 1);
    return finite_diff_check([](const Tensor& v) { return variance(v); }, x, h);
  });
  checks.emplace_back("ln_clamped", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({6}, 0.5, 2.0);
    const Tensor r = in.uniform({6}, -1, 1);
    return finite_diff_check(
        [&](const Tensor& v) { return weighted_sum(ln_clamped(v, 1e-6), r); }, x, h);
  });
  checks.emplace_back("elementwise", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor a = in.away_from_zero({5}), b = in.uniform({5}, 0.5, 1.5);
    const Tensor xs[] = {a, b};
    return finite_diff_check(
        [](std::span<const Tensor> v) {
          const Tensor t = add(mul(abs(v[0]), exp(v[1])), div(v[0], sqrt(v[1])));
          return sum(add_scalar(scale(sub(t, v[1]), 0.5), 1.0));
        },
        xs, h);
  });
  checks.emplace_back("logsumexp_gather", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor x = in.uniform({3, 4}, -2, 2);
    const std::vector<std::size_t> idx{0, 5, 6, 11, 2, 9};
    return finite_diff_check(
        [&](const Tensor& v) { return sum(logsumexp_rows(gather(v, idx, {2, 3}))); }, x, h);
  });
  checks.emplace_back("backbone_embed", [](std::uint64_t seed, double h) {
    Instance in(seed);
    MlpConfig cfg{6, {7}, 4, Activation::relu, seed};
    const MlpParams params = init_params(cfg);
    Tensor x = in.uniform({5, 6}, -1, 1);
    while (!clear_of_kinks(params, x)) x = in.uniform({5, 6}, -1, 1);
    const Tensor r = in.uniform({5, 4}, -1, 1);
    std::vector<Tensor> xs;
    for (const auto* t : params.tensors()) xs.push_back(*t);
    return finite_diff_check(
        [&](std::span<const Tensor> v) {
          MlpParams p = params;
          auto slots = p.tensors();
          for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = v[i];
          return weighted_sum(embed(p, x), r);
        },
        xs, h);
  });
  checks.emplace_back("proxy_normalized", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const ProxyBank bank = init_random(3, 5, seed + 17);
    const Tensor r = in.uniform({3, 5}, -1, 1);
    return finite_diff_check(
        [&](const Tensor& p) {
          ProxyBank b = bank;
          b.proxies = p;
          return weighted_sum(b.normalized(), r);
        },
        bank.proxies, h);
  });
  checks.emplace_back("pd_loss_pipeline", [](std::uint64_t seed, double h) {
    // Embeddings lean toward their proxy so the mean gap stays off the clamp.
    Instance in(seed);
    const auto labels = in.labels(8, 3);
    const ProxyBank bank = init_random(3, 16, seed + 17);
    const Tensor noise = in.uniform({8, 16}, -0.1, 0.1);
    const Tensor centers = bank.normalized();
    std::vector<double> rows(8 * 16);
    for (std::size_t i = 0; i < 8; ++i) {
      for (std::size_t j = 0; j < 16; ++j) {
        rows[i * 16 + j] = centers.at(static_cast<std::size_t>(labels[i]), j) + noise.at(i, j);
      }
    }
    const Tensor z = l2_normalize_rows(Tensor({8, 16}, std::move(rows)), kNormalizeEps);
    LossConfig cfg;
    const Tensor xs[] = {z, bank.proxies};
    return finite_diff_check(
        [&](std::span<const Tensor> v) {
          ProxyBank b = bank;
          b.proxies = v[1];
          return pd_loss_from_batch(v[0], labels, b, cfg);
        },
        xs, h);
  });
  checks.emplace_back("d_loss_pipeline", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor z = l2_normalize_rows(in.uniform({8, 6}, -1, 1), kNormalizeEps);
    const auto labels = in.labels(8, 3);
    return finite_diff_check([&](const Tensor& v) { return d_loss_batch(v, labels, 1e-6); }, z, h);
  });
  checks.emplace_back("proxy_nca_pipeline", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const Tensor z = l2_normalize_rows(in.uniform({6, 5}, -1, 1), kNormalizeEps);
    const auto labels = in.labels(6, 4);
    const ProxyBank bank = init_random(4, 5, seed + 17);
    const Tensor xs[] = {z, bank.proxies};
    return finite_diff_check(
        [&](std::span<const Tensor> v) {
          ProxyBank b = bank;
          b.proxies = v[1];
          return proxy_nca_loss(v[0], labels, b);
        },
        xs, h);
  });
  checks.emplace_back("triplet_pipeline", [](std::uint64_t seed, double h) {
    Instance in(seed);
    const auto labels = in.labels(8, 3);
    Tensor z = l2_normalize_rows(in.uniform({8, 5}, -1, 1), kNormalizeEps);
    while (min_abs_triplet_margin(z, labels, 0.2) < kKinkMargin) {
      z = l2_normalize_rows(in.uniform({8, 5}, -1, 1), kNormalizeEps);
    }
    return finite_diff_check(
        [&](const Tensor& v) { return triplet_loss_batch_all(v, labels, 0.2); }, z, h);
  });
  return checks;
}

}  // namespace

std::vector<std::string> gradient_check_names() {
  std::vector<std::string> names;
  for (const auto& [name, fn] : make_checks()) names.push_back(name);
  return names;
}

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t base_seed, int num_seeds, double h) {
  std::vector<GradCheckResult> out;
  for (const auto& [name, fn] : make_checks()) {
    for (int s = 0; s < num_seeds; ++s) {
      const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(s);
      out.push_back({name, seed, fn(seed, h)});
    }
  }
  return out;
}

}  // namespace pdl
