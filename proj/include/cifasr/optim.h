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

#ifndef CIFASR_OPTIM_H_
#define CIFASR_OPTIM_H_

#include <cstdint>
#include <map>
#include <string>

#include "cifasr/params.h"

namespace cifasr {

struct AdamConfig {
  double base_lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-9;
  int warmup_steps = 25000;
  int d_model = 256;
};

// Inverse-square-root warmup:
//   lr(t) = base_lr · d_model^-0.5 · min(t^-0.5, t · warmup^-1.5),  t ≥ 1.
double NoamLearningRate(const AdamConfig& config, std::int64_t step);

// Adam moments, allocated lazily and only for parameters that are trainable
// when a step is taken.
class AdamState {
 public:
  struct Moments {
    Tensor m;
    Tensor v;
  };

  AdamState() = default;
  explicit AdamState(AdamConfig config) : config_(config) {}

  const AdamConfig& config() const { return config_; }
  std::int64_t step() const { return step_; }
  double current_lr() const { return NoamLearningRate(config_, step_ > 0 ? step_ : 1); }
  bool HasMoments(const std::string& name) const { return moments_.contains(name); }
  std::size_t NumMoments() const { return moments_.size(); }

 private:
  friend void adam_step(ModelParams& params, AdamState& state);

  AdamConfig config_;
  std::int64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

// One Adam update of every trainable parameter that holds a gradient, then
// clears all gradients.  Frozen parameters never get moments.
void adam_step(ModelParams& params, AdamState& state);

// Rescales all gradients so their global L2 norm is at most max_norm.
// Returns the norm measured before clipping.
double clip_grad_norm(ModelParams& params, double max_norm);

double global_grad_norm(const ModelParams& params);

}  // namespace cifasr

#endif  // CIFASR_OPTIM_H_
