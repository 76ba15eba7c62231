#include "sgl0/autodiff.hpp"

#include <algorithm>

#include "sgl0/error.hpp"

namespace sgl0 {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::leaf: return "leaf";
    case OpKind::affine: return "affine";
    case OpKind::conv2d: return "conv2d";
    case OpKind::maxpool2d: return "maxpool2d";
    case OpKind::relu: return "relu";
    case OpKind::flatten: return "flatten";
    case OpKind::softmax_xent: return "softmax_xent";
    case OpKind::least_squares: return "least_squares";
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::scale: return "scale";
    case OpKind::sum: return "sum";
  }
  return "unknown";
}

Tape& Var::tape() const {
  if (!tape_) throw UsageError("variable is not attached to a tape");
  return *tape_;
}

const Tensor& Var::value() const { return tape().value(*this); }
const Tensor& Var::grad() const { return tape().grad(*this); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  has_gradients_ = false;
  return Var(this, nodes_.size() - 1);
}

bool Tape::any_requires_grad(std::initializer_list<Var> inputs) const {
  return std::any_of(inputs.begin(), inputs.end(), [this](Var v) { return node(v).requires_grad; });
}

Var Tape::record(OpKind kind, std::initializer_list<Var> inputs, Tensor value, BackwardFn backward) {
  Node n;
  n.kind = kind;
  n.value = std::move(value);
  for (Var v : inputs) {
    node(v);  // validates ownership
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  has_gradients_ = false;
  return Var(this, nodes_.size() - 1);
}

const Tape::Node& Tape::node(Var v) const {
  if (v.tape_ != this) throw UsageError("variable belongs to a different tape");
  if (v.id_ >= nodes_.size()) throw UsageError("variable refers to a cleared tape entry");
  return nodes_[v.id_];
}

void Tape::backward(Var root) {
  if (!root.valid()) throw UsageError("backward called before any forward pass was recorded");
  const Node& r = node(root);
  if (r.value.size() != 1) {
    throw UsageError("backward needs a scalar root, got shape " + shape_string(r.value.shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  nodes_[root.id()].grad = Tensor(r.value.shape(), 1.0);

  std::vector<const Tensor*> in_values;
  std::vector<Tensor*> in_grads;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    in_values.clear();
    in_grads.clear();
    for (std::size_t in : n.inputs) {
      Node& src = nodes_[in];
      in_values.push_back(&src.value);
      if (src.requires_grad) {
        if (src.grad.empty()) src.grad = Tensor(src.value.shape(), 0.0);
        in_grads.push_back(&src.grad);
      } else {
        in_grads.push_back(nullptr);
      }
    }
    n.backward(n.grad, in_values, in_grads);
  }
  has_gradients_ = true;
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

const Tensor& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!has_gradients_) throw UsageError("gradients requested before backward");
  if (n.grad.empty()) {
    // Not reachable from the root: the gradient is identically zero.
    n.grad = Tensor(n.value.shape(), 0.0);
  }
  return n.grad;
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }
OpKind Tape::kind(Var v) const { return node(v).kind; }

void Tape::clear() {
  nodes_.clear();
  has_gradients_ = false;
}

}  // namespace sgl0
