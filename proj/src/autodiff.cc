// Copyright 2026  The cifasr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cifasr/autodiff.h"

#include "cifasr/errors.h"

namespace cifasr {

const Tensor& Var::value() const { return tape_->value(id_); }

const Tensor& Var::grad() const { return tape_->grad_or_empty(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.leaf = true;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.leaf = true;
  n.requires_grad = grad_enabled_ && p.trainable;
  n.param = n.requires_grad ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Tensor value, std::vector<int> inputs, BackwardFn backward) {
  if (!value.AllFinite()) {
    throw NumericError("non-finite value produced by op on tape node " +
                       std::to_string(nodes_.size()));
  }
  Node n;
  n.value = std::move(value);
  for (int in : inputs) n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  n.inputs = std::move(inputs);
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[id];
  return n.external ? *n.external : n.value;
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::ZerosLike(value(id));
  return n.grad;
}

void Tape::backward(const Var& loss, double seed) {
  if (loss.tape_ != this) throw ContractError("backward: variable belongs to another tape");
  if (value(loss.id()).size() != 1) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        ShapeString(value(loss.id()).shape()));
  }
  const int top = loss.id();
  // Intermediate gradients from an earlier pass are stale; leaf gradients
  // keep accumulating.
  for (int i = 0; i <= top; ++i) {
    if (!nodes_[i].leaf) nodes_[i].grad = Tensor();
  }
  if (!nodes_[top].requires_grad) return;
  grad(top)[0] += seed;
  for (int i = top; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) {
      n.backward(*this, i);
    } else if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (p.grad.empty()) {
        p.grad = std::move(n.grad);
      } else {
        p.grad.Accumulate(n.grad);
      }
      n.grad = Tensor();
    }
  }
}

}  // namespace cifasr
