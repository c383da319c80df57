// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation. A Tape records every op output in creation
// order together with a closure that pushes the output gradient back onto its
// inputs. Creation order is a topological order, so backward() is a single
// reverse sweep.
#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <string>
#include <string_view>
#include <deque>
#include <vector>

#include "sgn/tensor.hpp"

namespace sgn {

template <typename Real>
class Tape;

/// Handle to one node of a Tape. Cheap to copy; valid while the tape lives.
template <typename Real>
class Var {
 public:
  Var() = default;
  Var(Tape<Real>* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr; }
  Tape<Real>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor<Real>& value() const;
  const Shape& shape() const { return value().shape(); }
  bool needs_grad() const;

 private:
  Tape<Real>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Real>
class Tape {
 public:
  /// Called with the tape and the node's own id; reads grad(self) and adds
  /// into grad(input) for every input that needs a gradient.
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf bound to a parameter tensor. Gradients accumulate directly into
  /// param.grad() when param.requires_grad().
  Var<Real> parameter(Tensor<Real>& param);

  /// Leaf that never receives a gradient.
  Var<Real> constant(Tensor<Real> value);

  /// Appends an op output. `backward` is dropped when no input needs grad.
  Var<Real> record(std::string_view op, Tensor<Real> value,
                   std::initializer_list<Var<Real>> inputs, BackwardFn backward);

  const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  const std::string& op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& inputs(std::size_t id) const {
    return nodes_[id].inputs;
  }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

  /// Gradient buffer of a node, zero-initialized on first access.
  std::span<Real> grad(std::size_t id);
  bool has_grad(std::size_t id) const;

  /// Reverse sweep from a scalar loss. Intermediate gradients are reset at
  /// the start, parameter gradients accumulate.
  void backward(Var<Real> loss);

  /// Number of backward closures run by the last backward().
  std::size_t last_backward_visits() const { return last_visits_; }

  void push_scope(std::string name) { scopes_.push_back(std::move(name)); }
  void pop_scope() { scopes_.pop_back(); }
  std::string scope_path() const;

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Tensor<Real> value;
    std::vector<Real> grad;
    Tensor<Real>* param = nullptr;
    bool needs_grad = false;
    BackwardFn backward;
  };

  // A deque so that value() references survive later records.
  std::deque<Node> nodes_;
  std::vector<std::string> scopes_;
  bool grad_enabled_;
  std::size_t last_visits_ = 0;
};

/// Names the enclosing layer in strict-mode NaN diagnostics.
template <typename Real>
class TapeScope {
 public:
  TapeScope(Tape<Real>& tape, std::string name) : tape_(tape) {
    tape_.push_scope(std::move(name));
  }
  ~TapeScope() { tape_.pop_scope(); }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<Real>& tape_;
};

template <typename Real>
const Tensor<Real>& Var<Real>::value() const {
  return tape_->value(id_);
}

template <typename Real>
bool Var<Real>::needs_grad() const {
  return tape_->needs_grad(id_);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace sgn
