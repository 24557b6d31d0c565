#include "pdl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pdl/error.hpp"
#include "pdl/kernels.hpp"

namespace pdl {

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << "x";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : values_(std::make_shared<const std::vector<double>>()), shape_{0} {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : values_(std::make_shared<const std::vector<double>>(std::move(values))),
      shape_(std::move(shape)),
      requires_grad_(requires_grad) {
  if (shape_size(shape_) != values_->size()) {
    throw DimensionError("tensor shape " + shape_to_string(shape_) + " does not match " +
                         std::to_string(values_->size()) + " values");
  }
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::zeros(Shape shape) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Tensor::rows() const { return rank() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (rank() == 2) return shape_[1];
  if (rank() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_to_string(shape_));
  return (*values_)[0];
}

Tensor Tensor::detach() const {
  Tensor out = *this;
  out.tape_ = nullptr;
  out.node_ = kNoNode;
  out.generation_ = 0;
  return out;
}

// ---------------------------------------------------------------------------
// Gradients

const Tensor& Gradients::of(const Tensor& t) const { return at(t.node_id()); }

const Tensor& Gradients::at(NodeId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) {
    throw ContractError("no gradient recorded for node " + std::to_string(id));
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Tape

NodeId Tape::add_node(std::size_t size, bool needs_grad, bool leaf) {
  nodes_.push_back({size, needs_grad, leaf});
  return nodes_.size() - 1;
}

bool Tape::bound_here(const Tensor& t) const {
  return t.tape_ == this && t.generation_ == generation_;
}

Tensor Tape::watch(const Tensor& t) {
  Tensor out = t.detach();
  out.requires_grad_ = true;
  out.tape_ = this;
  out.generation_ = generation_;
  out.node_ = add_node(t.size(), true, true);
  return out;
}

void Tape::reset() {
  nodes_.clear();
  entries_.clear();
  ++generation_;
}

Tensor Tape::record(std::string_view op, std::span<const Tensor* const> inputs, Shape shape,
                    std::vector<double> values, BackwardFn backward) {
  bool needs = false;
  std::vector<NodeId> ids;
  ids.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    if (in->tape_ == nullptr) {
      ids.push_back(kNoNode);
      continue;
    }
    if (!bound_here(*in)) {
      throw ContractError(std::string(op) + ": input belongs to another or a consumed tape");
    }
    ids.push_back(in->node_);
    needs = needs || nodes_[in->node_].needs_grad;
  }
  Tensor out(std::move(shape), std::move(values));
  if (!needs) return out;
  out.tape_ = this;
  out.generation_ = generation_;
  out.node_ = add_node(out.size(), true, false);
  entries_.push_back({std::string(op), std::move(ids), out.node_, std::move(backward)});
  return out;
}

Gradients Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        shape_to_string(loss.shape()));
  }
  if (!bound_here(loss)) {
    throw ContractError("backward(): loss was not produced through this tape");
  }

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[loss.node_].assign(1, 1.0);

  std::vector<std::span<double>> in_spans;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    const auto& g_out = grads[it->output];
    if (g_out.empty()) continue;
    in_spans.assign(it->inputs.size(), std::span<double>{});
    for (std::size_t k = 0; k < it->inputs.size(); ++k) {
      const NodeId id = it->inputs[k];
      if (id == kNoNode || !nodes_[id].needs_grad) continue;
      if (grads[id].empty()) grads[id].assign(nodes_[id].size, 0.0);
      in_spans[k] = grads[id];
    }
    it->backward(g_out, in_spans);
  }

  Gradients result;
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].leaf) continue;
    auto buf = std::move(grads[id]);
    if (buf.empty()) buf.assign(nodes_[id].size, 0.0);
    const auto n = buf.size();
    result.grads_.emplace(id, Tensor({n}, std::move(buf)));
  }
  reset();
  return result;
}

// ---------------------------------------------------------------------------
// Ops

namespace {

using Values = std::shared_ptr<const std::vector<double>>;

Values values_of(const Tensor& t) {
  return std::make_shared<const std::vector<double>>(t.values().begin(), t.values().end());
}

Tape* tape_of(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (t->tape() == nullptr) continue;
    if (tape != nullptr && tape != t->tape()) {
      throw ContractError("op inputs are bound to different tapes");
    }
    tape = t->tape();
  }
  return tape;
}

Tensor emit(std::string_view op, std::initializer_list<const Tensor*> inputs, Shape shape,
            std::vector<double> values, BackwardFn backward) {
  Tape* tape = tape_of(inputs);
  if (tape == nullptr) return Tensor(std::move(shape), std::move(values));
  std::vector<const Tensor*> in(inputs);
  return tape->record(op, in, std::move(shape), std::move(values), std::move(backward));
}

void require_matrix(const Tensor& t, std::string_view op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " +
                         shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                         shape_to_string(b.shape()) + " differ");
  }
}

void require_nonempty(const Tensor& t, std::string_view op) {
  if (t.size() == 0) throw EmptySetError(std::string(op) + ": empty input");
}

template <typename Fwd, typename Deriv>
Tensor unary(std::string_view op, const Tensor& x, Fwd fwd, Deriv deriv) {
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  auto xv = values_of(x);
  auto yv = std::make_shared<const std::vector<double>>(out);
  return emit(op, {&x}, x.shape(), std::move(out),
              [xv, yv, deriv](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < g.size(); ++i) {
                  gin[0][i] += g[i] * deriv((*xv)[i], (*yv)[i]);
                }
              });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_to_string(a.shape()) +
                         " and " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::gemm_nn(a.values(), b.values(), out, m, k, n);
  auto av = values_of(a), bv = values_of(b);
  return emit("matmul", {&a, &b}, {m, n}, std::move(out),
              [av, bv, m, k, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                if (!gin[0].empty()) {
                  std::vector<double> tmp(m * k);
                  kernels::gemm_nt(g, *bv, tmp, m, n, k);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[0][i] += tmp[i];
                }
                if (!gin[1].empty()) {
                  std::vector<double> tmp(k * n);
                  kernels::gemm_tn(*av, g, tmp, m, k, n);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[1][i] += tmp[i];
                }
              });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_matrix(a, "matmul_nt");
  require_matrix(b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  if (b.cols() != k) {
    throw DimensionError("matmul_nt: inner dimensions differ for " +
                         shape_to_string(a.shape()) + " and " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::gemm_nt(a.values(), b.values(), out, m, k, n);
  auto av = values_of(a), bv = values_of(b);
  return emit("matmul_nt", {&a, &b}, {m, n}, std::move(out),
              [av, bv, m, k, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                if (!gin[0].empty()) {
                  std::vector<double> tmp(m * k);
                  kernels::gemm_nn(g, *bv, tmp, m, n, k);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[0][i] += tmp[i];
                }
                if (!gin[1].empty()) {
                  std::vector<double> tmp(n * k);
                  kernels::gemm_tn(g, *av, tmp, m, n, k);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[1][i] += tmp[i];
                }
              });
}

Tensor transpose(const Tensor& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.at(i, j);
  return emit("transpose", {&a}, {n, m}, std::move(out),
              [m, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j) gin[0][i * n + j] += g[j * m + i];
              });
}

Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_matrix(x, "affine");
  require_matrix(w, "affine");
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  if (w.rows() != k || b.rank() != 1 || b.size() != n) {
    throw DimensionError("affine: incompatible shapes X" + shape_to_string(x.shape()) + " W" +
                         shape_to_string(w.shape()) + " b" + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n);
  kernels::gemm_nn(x.values(), w.values(), out, m, k, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += b[j];
  auto xv = values_of(x), wv = values_of(w);
  return emit("affine", {&x, &w, &b}, {m, n}, std::move(out),
              [xv, wv, m, k, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                if (!gin[0].empty()) {
                  std::vector<double> tmp(m * k);
                  kernels::gemm_nt(g, *wv, tmp, m, n, k);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[0][i] += tmp[i];
                }
                if (!gin[1].empty()) {
                  std::vector<double> tmp(k * n);
                  kernels::gemm_tn(*xv, g, tmp, m, k, n);
                  for (std::size_t i = 0; i < tmp.size(); ++i) gin[1][i] += tmp[i];
                }
                if (!gin[2].empty()) {
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) gin[2][j] += g[i * n + j];
                }
              });
}

Tensor relu(const Tensor& x) {
  return unary(
      "relu", x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor l2_normalize_rows(const Tensor& x, double eps) {
  if (!(eps > 0.0)) throw ContractError("l2_normalize_rows: eps must be positive");
  require_matrix(x, "l2_normalize_rows");
  const std::size_t m = x.rows(), d = x.cols();
  const auto norms = kernels::row_norms(x.values(), m, d);
  std::vector<double> out(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    const double denom = std::max(norms[i], eps);
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] = x.at(i, j) / denom;
  }
  auto yv = std::make_shared<const std::vector<double>>(out);
  auto nv = std::make_shared<const std::vector<double>>(norms);
  return emit("l2_normalize_rows", {&x}, x.shape(), std::move(out),
              [yv, nv, m, d, eps](std::span<const double> g,
                                  std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < m; ++i) {
                  const double norm = (*nv)[i];
                  const double* y = yv->data() + i * d;
                  const double* gi = g.data() + i * d;
                  double* dx = gin[0].data() + i * d;
                  if (norm < eps) {
                    for (std::size_t j = 0; j < d; ++j) dx[j] += gi[j] / eps;
                    continue;
                  }
                  double yg = 0.0;
                  for (std::size_t j = 0; j < d; ++j) yg += y[j] * gi[j];
                  for (std::size_t j = 0; j < d; ++j) dx[j] += (gi[j] - y[j] * yg) / norm;
                }
              });
}

Tensor sum(const Tensor& v) {
  double acc = 0.0;
  for (double x : v.values()) acc += x;
  return emit("sum", {&v}, {}, {acc},
              [](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (double& dx : gin[0]) dx += g[0];
              });
}

namespace {

/// Σ f(x) accumulated in ascending order of x, so any permutation of the
/// same values gives the same bits.
template <typename F>
double order_free_sum(std::span<const double> values, F f) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double acc = 0.0;
  for (double x : sorted) acc += f(x);
  return acc;
}

}  // namespace

Tensor mean(const Tensor& v) {
  require_nonempty(v, "mean");
  const auto n = static_cast<double>(v.size());
  const double acc = order_free_sum(v.values(), [](double x) { return x; });
  return emit("mean", {&v}, {}, {acc / n},
              [n](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (double& dx : gin[0]) dx += g[0] / n;
              });
}

Tensor variance(const Tensor& v) {
  require_nonempty(v, "variance");
  const auto n = static_cast<double>(v.size());
  const double mu = order_free_sum(v.values(), [](double x) { return x; }) / n;
  const double acc = order_free_sum(v.values(), [mu](double x) { return (x - mu) * (x - mu); });
  auto vv = values_of(v);
  return emit("variance", {&v}, {}, {acc / n},
              [vv, mu, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < vv->size(); ++i) {
                  gin[0][i] += g[0] * 2.0 * ((*vv)[i] - mu) / n;
                }
              });
}

Tensor ln_clamped(const Tensor& x, double floor) {
  if (!(floor > 0.0)) throw ContractError("ln_clamped: floor must be positive");
  return unary(
      "ln_clamped", x, [floor](double v) { return std::log(std::max(v, floor)); },
      [floor](double v, double) { return 1.0 / std::max(v, floor); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return emit("add", {&a, &b}, a.shape(), std::move(out),
              [](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (auto& dx : gin)
                  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += g[i];
              });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  return emit("sub", {&a, &b}, a.shape(), std::move(out),
              [](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i];
                for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] -= g[i];
              });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto av = values_of(a), bv = values_of(b);
  return emit("mul", {&a, &b}, a.shape(), std::move(out),
              [av, bv](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] * (*bv)[i];
                for (std::size_t i = 0; i < gin[1].size(); ++i) gin[1][i] += g[i] * (*av)[i];
              });
}

Tensor div(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "div");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] / b[i];
  auto av = values_of(a), bv = values_of(b);
  return emit("div", {&a, &b}, a.shape(), std::move(out),
              [av, bv](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < gin[0].size(); ++i) gin[0][i] += g[i] / (*bv)[i];
                for (std::size_t i = 0; i < gin[1].size(); ++i) {
                  const double bi = (*bv)[i];
                  gin[1][i] -= g[i] * (*av)[i] / (bi * bi);
                }
              });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double c) {
  return unary(
      "add_scalar", x, [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor logsumexp_rows(const Tensor& x) {
  require_matrix(x, "logsumexp_rows");
  const std::size_t m = x.rows(), n = x.cols();
  if (n == 0) throw EmptySetError("logsumexp_rows: rows are empty");
  std::vector<double> out(m);
  auto soft = std::make_shared<std::vector<double>>(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = x.at(i, 0);
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += std::exp(x.at(i, j) - mx);
    out[i] = mx + std::log(acc);
    for (std::size_t j = 0; j < n; ++j) (*soft)[i * n + j] = std::exp(x.at(i, j) - out[i]);
  }
  return emit("logsumexp_rows", {&x}, {m}, std::move(out),
              [soft, m, n](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < m; ++i)
                  for (std::size_t j = 0; j < n; ++j)
                    gin[0][i * n + j] += g[i] * (*soft)[i * n + j];
              });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices, Shape shape) {
  if (shape_size(shape) != indices.size()) {
    throw DimensionError("gather: " + std::to_string(indices.size()) +
                         " indices cannot fill shape " + shape_to_string(shape));
  }
  std::vector<double> out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= x.size()) {
      throw DimensionError("gather: index " + std::to_string(indices[i]) +
                           " out of range for shape " + shape_to_string(x.shape()));
    }
    out[i] = x[indices[i]];
  }
  auto idx = std::make_shared<const std::vector<std::size_t>>(indices.begin(), indices.end());
  return emit("gather", {&x}, std::move(shape), std::move(out),
              [idx](std::span<const double> g, std::span<const std::span<double>> gin) {
                for (std::size_t i = 0; i < idx->size(); ++i) gin[0][(*idx)[i]] += g[i];
              });
}

Tensor gather(const Tensor& x, std::span<const std::size_t> indices) {
  return gather(x, indices, {indices.size()});
}

}  // namespace pdl
