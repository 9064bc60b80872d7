// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Tape-based reverse-mode differentiation. A Tape records one forward pass;
// Backward() walks it in reverse and accumulates gradients into the
// Parameters that were read. Parameter gradients are accumulated, never
// reset, so callers zero them between steps.

#pragma once

#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pedcross/error.hpp"
#include "pedcross/nn/tensor.hpp"

namespace pedcross::nn {

/// A learnable tensor with its gradient and the optimizer's running second
/// moment (all three share one shape).
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor cache;

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape()),
        cache(value.shape()) {}

  void ZeroGrad() { grad.Fill(0.0); }
};

class Tape;

// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Tensor& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value) {
    Node n;
    n.owned = std::move(value);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  // Reads `p.value` in place; gradients land in `p.grad`.
  Var Param(Parameter& p) {
    Node n;
    n.view = &p.value;
    n.param = &p;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  // Records an op result. `backward` is dropped when no input needs a
  // gradient.
  Var Record(Tensor value, std::initializer_list<Var> inputs,
             BackwardFn backward) {
    return Record(std::move(value), std::vector<Var>(inputs), std::move(backward));
  }

  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    Node n;
    n.owned = std::move(value);
    for (const Var& v : inputs) {
      if (v.tape != this) throw StateError("variable from a different tape");
      n.requires_grad = n.requires_grad || nodes_[v.id].requires_grad;
    }
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return {this, nodes_.size() - 1};
  }

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value(); }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

  // Gradient buffer of a node; only valid during Backward().
  Tensor& grad(Var v) {
    Node& n = nodes_.at(v.id);
    if (n.param) return n.param->grad;
    if (n.grad.empty()) n.grad = Tensor(n.value().shape());
    return n.grad;
  }

  std::size_t size() const { return nodes_.size(); }

  // Optional log of the side each piecewise op (ReLU, probability clamp)
  // took per element. Off by default; the gradient checker uses it to tell
  // when a finite-difference step crosses a kink.
  void RecordBranches(bool on) { record_branches_ = on; }
  bool recording_branches() const { return record_branches_; }
  void NoteBranch(bool side) { branches_.push_back(side); }
  const std::vector<bool>& branches() const { return branches_; }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every Parameter read.
  void Backward(Var loss) {
    if (nodes_.empty() || loss.tape != this || loss.id >= nodes_.size())
      throw StateError("backward called before a forward pass was recorded");
    if (nodes_[loss.id].value().size() != 1)
      throw StateError("backward needs a scalar loss, got shape " +
                       ShapeString(nodes_[loss.id].value().shape()));
    if (backward_done_) throw StateError("backward already ran on this tape");
    backward_done_ = true;
    if (!nodes_[loss.id].requires_grad) return;
    grad(loss)[0] += 1.0;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.backward || n.grad.empty()) continue;
      n.backward(n.grad);
    }
  }

 private:
  struct Node {
    Tensor owned;
    const Tensor* view = nullptr;
    Parameter* param = nullptr;
    Tensor grad;
    BackwardFn backward;
    bool requires_grad = false;

    const Tensor& value() const { return view ? *view : owned; }
  };

  std::deque<Node> nodes_;
  bool backward_done_ = false;
  bool record_branches_ = false;
  std::vector<bool> branches_;
};

inline const Tensor& Var::value() const {
  if (!tape) throw StateError("unbound variable");
  return tape->value(id);
}

}  // namespace pedcross::nn
