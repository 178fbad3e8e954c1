#pragma once

// Tape-based reverse-mode differentiation over dense 2-D tensors.
//
// A Tape records primitive operations in execution order, so every node's
// inputs precede it. backward() walks the record once in reverse. Leaves
// created from a Parameter forward their gradient into the parameter's
// gradient slot, accumulating across calls until the caller resets it.

#include <cstddef>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "vdn/tensor.hpp"

namespace vdn {

class Tape;

enum class OpKind {
  constant,
  parameter,
  matmul,
  add,
  add_bias,
  scale,
  sum,
  relu,
  prelu,
  mul_channel,
  l05_penalty,
  cross_entropy,
};

std::string_view to_string(OpKind kind);

/// Handle to a node on a Tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to `p`; backward() adds into p.tensor.grad().
  Var parameter(Parameter& p);
  /// Leaf holding a copy of `p` that does not receive gradients.
  Var parameter(const Parameter& p) { return constant(p.tensor); }

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  /// Gradient of the last backward() target with respect to `v`; empty if
  /// `v` was not reached.
  const std::vector<double>& grad(Var v) const { return nodes_[v.id()].grad; }
  OpKind kind(Var v) const { return nodes_[v.id()].kind; }
  std::span<const std::size_t> inputs(Var v) const { return nodes_[v.id()].inputs; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Populates gradients of the scalar `loss` for every reachable node.
  void backward(Var loss);

  // Used by the primitive operations.
  using BackwardFn = std::function<void(Tape&, const std::vector<double>& out_grad)>;
  Var record(OpKind kind, std::vector<std::size_t> inputs, Tensor value, BackwardFn backward);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of node `id`, zero-initialized on first use.
  std::vector<double>& grad_buffer(std::size_t id);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    Tensor value;
    std::vector<double> grad;
    Parameter* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Primitive operations. All operands must live on the same tape.

/// a[m×k] · b[k×n].
Var matmul(Var a, Var b);
/// Element-wise sum of equally shaped tensors.
Var add(Var a, Var b);
/// x[b×n] + bias[n], broadcast over rows.
Var add_bias(Var x, Var bias);
Var scale(Var x, double factor);
/// Sum of all elements, as a scalar.
Var sum(Var x);
Var relu(Var x);
/// y = x for x >= 0, slope·x otherwise. Column j of x uses
/// slopes[unit_map[j]]. At x == 0 the identity branch is taken and the
/// slope receives no gradient.
Var prelu(Var x, Var slopes, std::span<const std::size_t> unit_map);
/// x[b×n] scaled column-wise by gain[n].
Var mul_channel(Var x, Var gain);

/// Default guard below which |1 - slope| is clamped in the penalty gradient.
inline constexpr double kPenaltyGuard = 1e-4;

/// Sum over non-frozen slopes of |1 - slope|^0.5. The gradient evaluates the
/// magnitude at max(|1 - slope|, guard); frozen slopes contribute nothing.
Var l05_penalty(Var slopes, std::span<const std::uint8_t> frozen, double guard = kPenaltyGuard);

/// Mean softmax cross-entropy of logits[batch×classes] against labels.
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

/// Central-difference gradient check of `build_loss` with respect to `param`.
/// Returns max |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
double grad_check(const std::function<Var(Tape&)>& build_loss, Parameter& param,
                  double step = 1e-5);

}  // namespace vdn
