#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "sgl0/tensor.hpp"

namespace sgl0 {

enum class OpKind { leaf, affine, conv2d, maxpool2d, relu, flatten, softmax_xent, least_squares, add, mul, scale, sum };

std::string_view op_name(OpKind kind);

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  bool valid() const noexcept { return tape_ != nullptr; }
  Tape& tape() const;
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of a scalar computation.
///
/// Nodes are appended in evaluation order and only ever reference earlier
/// nodes, so a single reverse sweep visits each node once. Nodes whose inputs
/// need no gradient keep no backward closure.
class Tape {
 public:
  /// Receives the gradient of the node's output, the forward values of its
  /// inputs, and one gradient slot per input; a slot is null when that input
  /// does not require a gradient.
  using BackwardFn = std::function<void(const Tensor& out_grad, std::span<const Tensor* const> inputs,
                                        std::span<Tensor* const> input_grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// True when any of `inputs` requires a gradient. Ops consult this before
  /// saving forward state for backward.
  bool any_requires_grad(std::initializer_list<Var> inputs) const;

  Var record(OpKind kind, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward);

  /// Runs the reverse sweep from a scalar root. Re-running resets all gradients.
  void backward(Var root);

  const Tensor& value(Var v) const;
  const Tensor& grad(Var v) const;
  bool requires_grad(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const noexcept { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    OpKind kind = OpKind::leaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    mutable Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  const Node& node(Var v) const;

  std::deque<Node> nodes_;
  bool has_gradients_ = false;
};

// Layer ops. Every op validates shapes and throws DimensionError (or
// ConfigError/InputError where noted) before recording anything.

/// x: [B x ...] flattened to [B x I]; weight: [O x I]; bias: [O]. Output [B x O].
Var affine(Var x, Var weight, Var bias);

/// Valid cross-correlation. x: [B x C x H x W]; kernels: [F x C x k x k]; bias: [F].
/// Throws ConfigError when (H - k) or (W - k) is not a multiple of the stride.
Var conv2d(Var x, Var kernels, Var bias, std::size_t stride = 1);

/// Non-overlapping window max. x: [B x C x H x W]; window must divide H and W.
Var maxpool2d(Var x, std::size_t window);

Var relu(Var x);

/// [B x ...] -> [B x prod(...)].
Var flatten(Var x);

/// Mean over the batch of -log softmax(logits)[label]. logits: [B x K].
/// Throws InputError for labels outside [0, K).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// (1 / 2B) * sum (prediction - target)^2 over a [B x ...] batch.
Var least_squares(Var prediction, const Tensor& target);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sum(Var a);

/// Scalar function of parameter leaves recorded on the given tape.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var> params)>;

struct GradientCheck {
  double max_relative_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
};

/// Compares tape gradients of `f` at `params` with central differences of
/// step `step`. The error per coordinate is |analytic - numeric| / max(1, |analytic|).
GradientCheck finite_difference_check(const ScalarGraph& f, std::span<const Tensor> params, double step);

}  // namespace sgl0
