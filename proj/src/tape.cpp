// SPDX-License-Identifier: Apache-2.0
#include "sgn/tape.hpp"

#include <algorithm>

namespace sgn {

template <typename Real>
Var<Real> Tape<Real>::parameter(Tensor<Real>& param) {
  Node node;
  node.op = "parameter";
  node.param = &param;
  node.needs_grad = grad_enabled_ && param.requires_grad();
  // The node holds a snapshot of the values; gradients land in param.grad().
  node.value = Tensor<Real>(param.shape(), param.storage());
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Tape<Real>::constant(Tensor<Real> value) {
  Node node;
  node.op = "constant";
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
Var<Real> Tape<Real>::record(std::string_view op, Tensor<Real> value,
                             std::initializer_list<Var<Real>> inputs,
                             BackwardFn backward) {
  if (strict_mode()) {
    check_finite<Real>(value.data(), scope_path() + "/" + std::string(op));
  }
  Node node;
  node.op = std::string(op);
  node.value = std::move(value);
  for (const Var<Real>& in : inputs) {
    if (&in.tape() != this) {
      throw ContractError("op " + node.op + " mixes variables from different tapes");
    }
    node.inputs.push_back(in.id());
    node.needs_grad = node.needs_grad || nodes_[in.id()].needs_grad;
  }
  node.needs_grad = node.needs_grad && grad_enabled_;
  if (node.needs_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<Real>(this, nodes_.size() - 1);
}

template <typename Real>
std::span<Real> Tape<Real>::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.param) return node.param->grad();
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), Real(0));
  return node.grad;
}

template <typename Real>
bool Tape<Real>::has_grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.param) return node.param->has_grad();
  return !node.grad.empty();
}

template <typename Real>
void Tape<Real>::backward(Var<Real> loss) {
  if (&loss.tape() != this) throw ContractError("backward: loss belongs to another tape");
  if (loss.value().size() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " +
                        shape_string(loss.value().shape()));
  }
  for (Node& node : nodes_) {
    if (!node.param) node.grad.clear();
  }
  last_visits_ = 0;
  if (!nodes_[loss.id()].needs_grad) return;
  grad(loss.id())[0] += Real(1);
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
    ++last_visits_;
  }
}

template <typename Real>
std::string Tape<Real>::scope_path() const {
  std::string out;
  for (const std::string& s : scopes_) {
    if (!out.empty()) out += ".";
    out += s;
  }
  return out.empty() ? std::string("<root>") : out;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace sgn
