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

#ifndef CIFASR_AUTODIFF_H_
#define CIFASR_AUTODIFF_H_

#include <functional>
#include <string>
#include <vector>

#include "cifasr/tensor.h"

namespace cifasr {

// A named trainable value.  `grad` stays empty until a backward pass touches
// the parameter, and accumulates across backward passes until cleared.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool trainable = true;

  bool has_grad() const { return !grad.empty(); }
  void ClearGrad() { grad = Tensor(); }
};

class Tape;

// Handle to one node of a Tape.  Cheap to copy; only valid while the tape
// that created it is alive.
class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  int id() const { return id_; }

  const Tensor& value() const;
  // Gradient accumulated by the last backward pass (empty if none reached).
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records a forward computation as a list of nodes in topological order and
// replays it backwards.  One tape per thread; build, walk, discard.
class Tape {
 public:
  // Receives the tape and the id of the node being differentiated.
  using BackwardFn = std::function<void(Tape&, int)>;

  // With grad disabled every node is a constant: inference graphs record no
  // backward closures.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) { nodes_.reserve(512); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Free variable whose gradient is kept on the tape.
  Var leaf(Tensor value);
  // Binds a parameter by reference.  Frozen parameters become constants, so
  // no gradient ever flows into them.
  Var param(Parameter& p);

  // Appends an op result.  The node requires grad iff any input does.
  Var record(Tensor value, std::vector<int> inputs, BackwardFn backward);

  // Seeds d(loss)/d(loss) = seed and propagates to every node that requires
  // grad.  Parameter gradients are added into Parameter::grad.
  void backward(const Var& loss, double seed = 1.0);

  const Tensor& value(int id) const;
  // Allocates a zero gradient on first access.
  Tensor& grad(int id);
  const Tensor& grad_or_empty(int id) const { return nodes_[id].grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }
  bool grad_enabled() const { return grad_enabled_; }

 private:
  struct Node {
    Tensor value;
    const Tensor* external = nullptr;
    Tensor grad;
    std::vector<int> inputs;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool leaf = false;
  };

  std::vector<Node> nodes_;
  bool grad_enabled_ = true;
};

}  // namespace cifasr

#endif  // CIFASR_AUTODIFF_H_
