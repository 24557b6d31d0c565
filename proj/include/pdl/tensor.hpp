#pragma once

// Reverse-mode differentiation over dense f64 arrays.
//
// A Tensor is an immutable value (shape + row-major buffer). Tensors that are
// not bound to a Tape are plain constants: ops on them just compute values.
// Binding a tensor with Tape::watch makes it a differentiable leaf; every op
// that consumes a tape-bound input appends an entry to that tape, and
// Tape::backward walks the entries in reverse.

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pdl {

using Shape = std::vector<std::size_t>;
using NodeId = std::size_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class Tape;

std::string shape_to_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v);
  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
  static Tensor zeros(Shape shape);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_->size(); }
  /// Row count of a matrix (1 for a vector or scalar).
  std::size_t rows() const;
  /// Column count of a matrix (length of a vector).
  std::size_t cols() const;
  bool is_scalar() const { return size() == 1 && rank() <= 1; }

  std::span<const double> values() const { return *values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  double at(std::size_t r, std::size_t c) const { return (*values_)[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  NodeId node_id() const { return node_; }
  Tape* tape() const { return tape_; }

  /// Same values, no tape binding; keeps the requires_grad flag.
  Tensor detach() const;

 private:
  friend class Tape;

  std::shared_ptr<const std::vector<double>> values_;
  Shape shape_;
  bool requires_grad_ = false;
  Tape* tape_ = nullptr;
  NodeId node_ = kNoNode;
  std::size_t generation_ = 0;
};

/// Gradient buffers produced by Tape::backward, keyed by node id.
class Gradients {
 public:
  const Tensor& of(const Tensor& t) const;
  const Tensor& at(NodeId id) const;
  bool contains(NodeId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  std::unordered_map<NodeId, Tensor> grads_;
};

/// Receives, for each op input, a writable span into that input's gradient
/// accumulator. The span is empty when the input does not need a gradient.
using BackwardFn = std::function<void(std::span<const double> grad_out,
                                      std::span<const std::span<double>> grad_in)>;

/// The computation record: an append-only list of op entries in topological
/// order. Not reentrant and not shareable across threads.
class Tape {
 public:
  struct Entry {
    std::string op;
    std::vector<NodeId> inputs;
    NodeId output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers `t` as a differentiable leaf of this tape.
  Tensor watch(const Tensor& t);

  /// Reverse accumulation from a scalar loss. Every watched leaf gets an entry
  /// in the result (zeros when disconnected). The tape is reset afterwards.
  Gradients backward(const Tensor& loss);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t num_nodes() const { return nodes_.size(); }
  void reset();

  /// Used by op implementations. Returns an untracked constant when no input
  /// requires a gradient.
  Tensor record(std::string_view op, std::span<const Tensor* const> inputs, Shape shape,
                std::vector<double> values, BackwardFn backward);

 private:
  struct Node {
    std::size_t size;
    bool needs_grad;
    bool leaf;
  };

  NodeId add_node(std::size_t size, bool needs_grad, bool leaf);
  bool bound_here(const Tensor& t) const;

  std::vector<Node> nodes_;
  std::vector<Entry> entries_;
  std::size_t generation_ = 1;
};

// ---------------------------------------------------------------------------
// Ops. Shapes follow the usual conventions: matrices are rank 2, vectors
// rank 1, scalars rank 0.

Tensor matmul(const Tensor& a, const Tensor& b);
/// A · Bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
/// X·W + b with b broadcast over rows.
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);
Tensor relu(const Tensor& x);
/// Each row divided by max(‖row‖₂, eps).
Tensor l2_normalize_rows(const Tensor& x, double eps);

Tensor sum(const Tensor& v);
Tensor mean(const Tensor& v);
/// Population variance (divides by n).
Tensor variance(const Tensor& v);
/// ln(max(x, floor)); the backward slope is 1/max(x, floor) even when clamped.
Tensor ln_clamped(const Tensor& x, double floor);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double c);
Tensor sqrt(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor exp(const Tensor& x);
/// Row-wise log-sum-exp of a matrix; returns a vector of length rows.
Tensor logsumexp_rows(const Tensor& x);
/// out[i] = x.flat[indices[i]], reshaped to `shape`.
Tensor gather(const Tensor& x, std::span<const std::size_t> indices, Shape shape);
Tensor gather(const Tensor& x, std::span<const std::size_t> indices);

}  // namespace pdl
