#include "numerics/autograd.hpp"

#include <cmath>

#include "common/error.hpp"

namespace clinbench::numerics {

const Tensor& Var::value() const {
  require(tape_ != nullptr, ErrorKind::Contract, "use of an unbound Var");
  return tape_->value(*this);
}

bool Var::requires_grad() const { return tape_ != nullptr && tape_->requires_grad(*this); }

void Tape::check_owned(const Var& v) const {
  require(v.tape_ == this && v.id_ < nodes_.size(), ErrorKind::Contract, "Var does not belong to this tape");
}

Var Tape::constant(Tensor value) {
  require(!backward_done_, ErrorKind::Contract, "tape already consumed by backward; call reset()");
  nodes_.push_back(Node{std::move(value), {}, nullptr, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  require(!backward_done_, ErrorKind::Contract, "tape already consumed by backward; call reset()");
  nodes_.push_back(Node{std::move(value), {}, nullptr, mode_ == GradMode::Enabled});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  require(!backward_done_, ErrorKind::Contract, "tape already consumed by backward; call reset()");
  Node node;
  node.value = std::move(value);
  node.inputs.reserve(inputs.size());
  for (const Var& in : inputs) {
    check_owned(in);
    node.inputs.push_back(in.id_);
    node.requires_grad = node.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(const Var& v) const {
  check_owned(v);
  return nodes_[v.id_].value;
}

bool Tape::requires_grad(const Var& v) const {
  check_owned(v);
  return nodes_[v.id_].requires_grad;
}

void Tape::backward(const Var& loss) {
  check_owned(loss);
  require(!backward_done_, ErrorKind::Contract, "backward called twice without reset()");
  const Tensor& lv = nodes_[loss.id_].value;
  require(lv.size() == 1, ErrorKind::Contract, "backward needs a scalar loss, got shape " + to_string(lv.shape()));
  require(nodes_[loss.id_].requires_grad, ErrorKind::Contract, "loss is not connected to any tracked variable");

  grads_.assign(nodes_.size(), std::nullopt);
  grads_[loss.id_] = Tensor::full(lv.shape(), 1.0);
  std::vector<Tensor*> grad_in;
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || !grads_[id]) continue;
    grad_in.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::size_t in = node.inputs[k];
      if (!nodes_[in].requires_grad) continue;
      if (!grads_[in]) grads_[in] = Tensor::zeros(nodes_[in].value.shape());
      grad_in[k] = &*grads_[in];
    }
    node.backward(*grads_[id], node.value, grad_in);
    // Interior gradients are no longer needed once propagated.
    if (!node.inputs.empty() && id != loss.id_) grads_[id].reset();
  }
  backward_done_ = true;
}

Tensor Tape::grad(const Var& v) const {
  check_owned(v);
  if (v.id_ < grads_.size() && grads_[v.id_]) return *grads_[v.id_];
  return Tensor::zeros(nodes_[v.id_].value.shape());
}

void Tape::reset() {
  nodes_.clear();
  grads_.clear();
  backward_done_ = false;
}

}  // namespace clinbench::numerics
