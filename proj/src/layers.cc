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

#include "cifasr/layers.h"

#include <cmath>

#include "cifasr/errors.h"

namespace cifasr {

Tensor positional_encoding(int length, int d_model) {
  if (length < 1 || d_model < 1) throw DimensionError("positional_encoding: empty table");
  Tensor pe({length, d_model});
  for (int p = 0; p < length; ++p) {
    for (int i = 0; i < d_model; i += 2) {
      const double angle = p / std::pow(10000.0, static_cast<double>(i) / d_model);
      pe.at(p, i) = std::sin(angle);
      if (i + 1 < d_model) pe.at(p, i + 1) = std::cos(angle);
    }
  }
  return pe;
}

namespace layers {

namespace {

Tensor Uniform(Shape shape, double bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : t.values()) v = u(rng);
  return t;
}

}  // namespace

void InitLinear(ModelParams& params, const std::string& prefix, int in, int out,
                std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  params.Add(prefix + ".weight", Uniform({in, out}, bound, rng));
  params.Add(prefix + ".bias", Uniform({out}, bound, rng));
}

void InitLayerNorm(ModelParams& params, const std::string& prefix, int d) {
  params.Add(prefix + ".gain", Tensor({d}, 1.0));
  params.Add(prefix + ".bias", Tensor({d}, 0.0));
}

void InitEmbedding(ModelParams& params, const std::string& prefix, int vocab, int d,
                   std::mt19937_64& rng) {
  // Unit variance after the sqrt(d) scale in EmbedTokens.
  params.Add(prefix + ".weight", Uniform({vocab, d}, std::sqrt(3.0 / d), rng));
}

void InitFeedForward(ModelParams& params, const std::string& prefix, int d, int d_ffn,
                     std::mt19937_64& rng) {
  InitLinear(params, prefix + ".w1", d, d_ffn, rng);
  InitLinear(params, prefix + ".w2", d_ffn, d, rng);
}

void InitAttention(ModelParams& params, const std::string& prefix, int d, std::mt19937_64& rng) {
  for (const char* name : {".query", ".key", ".value", ".out"}) {
    InitLinear(params, prefix + name, d, d, rng);
  }
}

void InitTransformerBlock(ModelParams& params, const std::string& prefix, int d, int d_ffn,
                          std::mt19937_64& rng) {
  InitLayerNorm(params, prefix + ".norm_att", d);
  InitAttention(params, prefix + ".att", d, rng);
  InitLayerNorm(params, prefix + ".norm_ff", d);
  InitFeedForward(params, prefix + ".ff", d, d_ffn, rng);
}

Var Linear(ForwardContext& ctx, const std::string& prefix, const Var& x) {
  return ops::linear(x, ctx.P(prefix + ".weight"), ctx.P(prefix + ".bias"));
}

Var LayerNorm(ForwardContext& ctx, const std::string& prefix, const Var& x) {
  return ops::layer_norm(x, ctx.P(prefix + ".gain"), ctx.P(prefix + ".bias"));
}

Var FeedForward(ForwardContext& ctx, const std::string& prefix, const Var& x) {
  Var hidden = ops::gelu(Linear(ctx, prefix + ".w1", x));
  return Linear(ctx, prefix + ".w2", ctx.Dropout(hidden));
}

Var MultiHeadAttention(ForwardContext& ctx, const std::string& prefix, const Var& query,
                       const Var& memory, int num_heads, int key_len, bool causal) {
  Var q = Linear(ctx, prefix + ".query", query);
  Var k = Linear(ctx, prefix + ".key", memory);
  Var v = Linear(ctx, prefix + ".value", memory);
  Var context = ops::attention(q, k, v, num_heads, key_len, causal);
  return Linear(ctx, prefix + ".out", context);
}

Var TransformerBlock(ForwardContext& ctx, const std::string& prefix, const Var& x,
                     int num_heads, int key_len) {
  Var y = LayerNorm(ctx, prefix + ".norm_att", x);
  Var out = ops::add(
      x, ctx.Dropout(MultiHeadAttention(ctx, prefix + ".att", y, y, num_heads, key_len, false)));
  y = LayerNorm(ctx, prefix + ".norm_ff", out);
  return ops::add(out, ctx.Dropout(FeedForward(ctx, prefix + ".ff", y)));
}

Var EmbedTokens(ForwardContext& ctx, const std::string& prefix, std::span<const int> ids) {
  Var table = ctx.P(prefix + ".weight");
  const int d = table.value().cols();
  Var emb = ops::scale(ops::embedding(table, ids), std::sqrt(static_cast<double>(d)));
  Var pe = ctx.tape.constant(positional_encoding(static_cast<int>(ids.size()), d));
  return ctx.Dropout(ops::add(emb, pe));
}

}  // namespace layers
}  // namespace cifasr
