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

#ifndef CIFASR_LAYERS_H_
#define CIFASR_LAYERS_H_

#include <random>
#include <string>
#include <string_view>

#include "cifasr/ops.h"
#include "cifasr/params.h"

namespace cifasr {

// Everything a forward pass needs besides its inputs.  A null rng means eval
// mode: dropout off, deterministic output.
struct ForwardContext {
  Tape& tape;
  ModelParams& params;
  std::mt19937_64* rng = nullptr;
  double dropout = 0.0;

  Var P(std::string_view name) { return tape.param(params.Get(name)); }
  bool training() const { return rng != nullptr; }
  Var Dropout(const Var& x) { return ops::dropout(x, dropout, rng); }
};

// Sinusoidal table: pe[p][2i] = sin(p / 10000^(2i/d)), pe[p][2i+1] = cos(same).
Tensor positional_encoding(int length, int d_model);

// Shared transformer pieces.  Init* register parameters under `prefix`;
// the matching forward functions read them back by name.
namespace layers {

// Uniform(±1/sqrt(fan_in)) weight [in×out] and bias [out].
void InitLinear(ModelParams& params, const std::string& prefix, int in, int out,
                std::mt19937_64& rng);
void InitLayerNorm(ModelParams& params, const std::string& prefix, int d);
void InitEmbedding(ModelParams& params, const std::string& prefix, int vocab, int d,
                   std::mt19937_64& rng);
void InitFeedForward(ModelParams& params, const std::string& prefix, int d, int d_ffn,
                     std::mt19937_64& rng);
void InitAttention(ModelParams& params, const std::string& prefix, int d, std::mt19937_64& rng);
// Pre-norm block: self-attention + feed-forward, each residual.
void InitTransformerBlock(ModelParams& params, const std::string& prefix, int d, int d_ffn,
                          std::mt19937_64& rng);

Var Linear(ForwardContext& ctx, const std::string& prefix, const Var& x);
Var LayerNorm(ForwardContext& ctx, const std::string& prefix, const Var& x);
Var FeedForward(ForwardContext& ctx, const std::string& prefix, const Var& x);
Var MultiHeadAttention(ForwardContext& ctx, const std::string& prefix, const Var& query,
                       const Var& memory, int num_heads, int key_len, bool causal);
Var TransformerBlock(ForwardContext& ctx, const std::string& prefix, const Var& x,
                     int num_heads, int key_len);
// Embedding scaled by sqrt(d) plus positional encoding.
Var EmbedTokens(ForwardContext& ctx, const std::string& prefix, std::span<const int> ids);

}  // namespace layers
}  // namespace cifasr

#endif  // CIFASR_LAYERS_H_
