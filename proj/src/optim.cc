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

#include "cifasr/optim.h"

#include <algorithm>
#include <cmath>


namespace cifasr {

double NoamLearningRate(const AdamConfig& config, std::int64_t step) {
  const double t = static_cast<double>(std::max<std::int64_t>(step, 1));
  const double warmup = static_cast<double>(std::max(config.warmup_steps, 1));
  return config.base_lr * std::pow(static_cast<double>(config.d_model), -0.5) *
         std::min(std::pow(t, -0.5), t * std::pow(warmup, -1.5));
}

void adam_step(ModelParams& params, AdamState& state) {
  const AdamConfig& c = state.config_;
  const std::int64_t t = ++state.step_;
  const double lr = NoamLearningRate(c, t);
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
  for (auto& p : params) {
    if (!p->trainable || !p->has_grad()) continue;
    auto [it, inserted] = state.moments_.try_emplace(p->name);
    AdamState::Moments& mom = it->second;
    if (inserted) {
      mom.m = Tensor::ZerosLike(p->value);
      mom.v = Tensor::ZerosLike(p->value);
    }
    double* value = p->value.data();
    const double* g = p->grad.data();
    double* m = mom.m.data();
    double* v = mom.v.data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
  params.ZeroGrad();
}

double global_grad_norm(const ModelParams& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p->has_grad()) continue;
    for (double g : p->grad.values()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_grad_norm(ModelParams& params, double max_norm) {
  const double norm = global_grad_norm(params);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& p : params) {
      if (!p->has_grad()) continue;
      for (double& g : p->grad.values()) g *= s;
    }
  }
  return norm;
}

}  // namespace cifasr
