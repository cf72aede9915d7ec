#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "numerics/rng.hpp"
#include "numerics/tensor.hpp"

namespace clinbench::numerics {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape
/// lives and has not been reset.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

enum class GradMode { Enabled, Disabled };

/// Reverse-mode gradient tape. Nodes are appended in construction order, so
/// the append order is already a topological order; backward walks it in
/// reverse.
class Tape {
 public:
  /// Receives the gradient flowing into a node's output (and the output
  /// itself) and accumulates into the gradients of its inputs. Entries of
  /// `grad_in` are null for inputs that do not require gradients.
  using BackwardFn =
      std::function<void(const Tensor& grad_out, const Tensor& out, std::span<Tensor* const> grad_in)>;

  explicit Tape(GradMode mode = GradMode::Enabled) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  GradMode mode() const noexcept { return mode_; }

  Var constant(Tensor value);
  /// Leaf that accumulates gradient (a constant when the tape has gradients disabled).
  Var variable(Tensor value);
  /// Appends an op output. The closure is dropped when no input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor& value(const Var& v) const;
  bool requires_grad(const Var& v) const;

  /// Runs reverse accumulation from a scalar loss. A second call without
  /// reset() is a contract error.
  void backward(const Var& loss);

  /// d(loss)/d(v); zeros when nothing flowed into v.
  Tensor grad(const Var& v) const;

  std::size_t size() const noexcept { return nodes_.size(); }
  void reset();

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(const Var& v) const;

  GradMode mode_;
  // deque: push_back keeps references returned by value() valid.
  std::deque<Node> nodes_;
  std::vector<std::optional<Tensor>> grads_;
  bool backward_done_ = false;
};

enum class Mode { Train, Eval };

// Differentiable ops. All inputs must live on the same tape.

/// [m,k] x [k,n] -> [m,n]
Var matmul(const Var& a, const Var& b);
/// Batched product over a leading axis: [n,m,k] x [n,k,p] -> [n,m,p], with
/// optional transposition of the trailing two axes of either operand.
Var bmm(const Var& a, const Var& b, bool transpose_a = false, bool transpose_b = false);
/// x[N,in] * w[in,out] + b[out]
Var affine(const Var& x, const Var& w, const Var& b);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// x[..., n] + bias[n]
Var add_bias(const Var& x, const Var& bias);

Var relu(const Var& x);
Var gelu(const Var& x);
Var exp(const Var& x);
Var log(const Var& x);
Var sigmoid(const Var& x);

Var reshape(const Var& x, Shape shape);
Var permute(const Var& x, const std::vector<std::size_t>& axes);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(const Var& x, std::size_t axis, std::size_t begin, std::size_t end);
/// Repeats a tensor with leading dim 1 `times` along axis 0.
Var tile_leading(const Var& x, std::size_t times);

Var sum(const Var& x);
Var mean(const Var& x);
Var mean_axis(const Var& x, std::size_t axis);

Var softmax(const Var& x, std::size_t axis);
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);
/// Inverted dropout. Eval mode and p == 0 are the identity.
Var dropout(const Var& x, double p, Mode mode, CounterRng& rng);
Var embedding_lookup(const Var& table, std::span<const std::int64_t> ids);

}  // namespace clinbench::numerics
