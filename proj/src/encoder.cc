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

#include "cifasr/encoder.h"

#include "cifasr/errors.h"

namespace cifasr {

namespace {

constexpr int kSubsampleKernel = 3;
constexpr int kSubsampleStride = 2;
constexpr int kSubsamplePadding = 1;

int StageLength(int frames) {
  return ops::conv1d_output_length(frames, kSubsampleKernel, kSubsampleStride, kSubsamplePadding);
}

}  // namespace

void EncoderConfig::Validate() const {
  if (feat_dim < 1 || num_blocks < 0 || d_model < 1 || num_heads < 1 || d_ffn < 1) {
    throw ContractError("encoder config: sizes must be positive");
  }
  if (d_model % num_heads != 0) {
    throw ContractError("encoder config: d_model " + std::to_string(d_model) +
                        " not divisible by num_heads " + std::to_string(num_heads));
  }
  if (conv_kernel < 1 || conv_kernel % 2 == 0) {
    throw ContractError("encoder config: conv_kernel must be odd");
  }
  if (dropout < 0.0 || dropout >= 1.0) throw ContractError("encoder config: dropout outside [0,1)");
}

int SubsampledLength(int frames) {
  if (frames < 1) return 0;
  const int first = StageLength(frames);
  return first < 1 ? 0 : StageLength(first);
}

void InitEncoderParams(ModelParams& params, const EncoderConfig& config, std::mt19937_64& rng) {
  config.Validate();
  const int d = config.d_model;
  auto conv = [&](const std::string& name, int din) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(kSubsampleKernel * din));
    std::uniform_real_distribution<double> u(-bound, bound);
    Tensor w({kSubsampleKernel, din, d});
    for (double& v : w.values()) v = u(rng);
    Tensor b({d});
    for (double& v : b.values()) v = u(rng);
    params.Add(name + ".weight", std::move(w));
    params.Add(name + ".bias", std::move(b));
  };
  conv("encoder.subsample.conv1", config.feat_dim);
  conv("encoder.subsample.conv2", d);
  layers::InitLinear(params, "encoder.subsample.proj", d, d, rng);
  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string p = "encoder.blocks." + std::to_string(b);
    layers::InitLayerNorm(params, p + ".norm_ff1", d);
    layers::InitFeedForward(params, p + ".ff1", d, config.d_ffn, rng);
    layers::InitLayerNorm(params, p + ".norm_att", d);
    layers::InitAttention(params, p + ".att", d, rng);
    layers::InitLayerNorm(params, p + ".norm_conv", d);
    layers::InitLinear(params, p + ".conv.pointwise1", d, 2 * d, rng);
    {
      const double bound = 1.0 / std::sqrt(static_cast<double>(config.conv_kernel));
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor w({config.conv_kernel, d});
      for (double& v : w.values()) v = u(rng);
      Tensor bias({d});
      for (double& v : bias.values()) v = u(rng);
      params.Add(p + ".conv.depthwise.weight", std::move(w));
      params.Add(p + ".conv.depthwise.bias", std::move(bias));
    }
    layers::InitLayerNorm(params, p + ".conv.norm", d);
    layers::InitLinear(params, p + ".conv.pointwise2", d, d, rng);
    layers::InitLayerNorm(params, p + ".norm_ff2", d);
    layers::InitFeedForward(params, p + ".ff2", d, config.d_ffn, rng);
    layers::InitLayerNorm(params, p + ".norm_out", d);
  }
}

Var subsample(ForwardContext& ctx, const Var& x, int valid_frames, const EncoderConfig& config) {
  const int T = x.value().rows();
  if (x.value().cols() != config.feat_dim) {
    throw DimensionError("subsample: feature dim " + std::to_string(x.value().cols()) +
                         ", expected " + std::to_string(config.feat_dim));
  }
  if (valid_frames < 0 || valid_frames > T) valid_frames = T;
  if (SubsampledLength(valid_frames) < 1) {
    throw InputTooShortError("subsample: " + std::to_string(valid_frames) +
                             " frames is too short");
  }
  Var y = ops::mask_rows(x, valid_frames);
  y = ops::conv1d(y, ctx.P("encoder.subsample.conv1.weight"), kSubsampleStride, kSubsamplePadding);
  y = ops::gelu(ops::add_row(y, ctx.P("encoder.subsample.conv1.bias")));
  const int valid1 = StageLength(valid_frames);
  y = ops::mask_rows(y, valid1);
  y = ops::conv1d(y, ctx.P("encoder.subsample.conv2.weight"), kSubsampleStride, kSubsamplePadding);
  y = ops::gelu(ops::add_row(y, ctx.P("encoder.subsample.conv2.bias")));
  return layers::Linear(ctx, "encoder.subsample.proj", y);
}

Var conformer_block(ForwardContext& ctx, const std::string& prefix, const Var& h, int valid_len,
                    const EncoderConfig& config) {
  Var x = h;
  Var y = layers::FeedForward(ctx, prefix + ".ff1", layers::LayerNorm(ctx, prefix + ".norm_ff1", x));
  x = ops::add(x, ops::scale(ctx.Dropout(y), 0.5));

  y = layers::LayerNorm(ctx, prefix + ".norm_att", x);
  y = layers::MultiHeadAttention(ctx, prefix + ".att", y, y, config.num_heads, valid_len, false);
  x = ops::add(x, ctx.Dropout(y));

  y = layers::LayerNorm(ctx, prefix + ".norm_conv", x);
  y = ops::glu(layers::Linear(ctx, prefix + ".conv.pointwise1", y));
  y = ops::mask_rows(y, valid_len);
  y = ops::depthwise_conv1d(y, ctx.P(prefix + ".conv.depthwise.weight"));
  y = ops::add_row(y, ctx.P(prefix + ".conv.depthwise.bias"));
  y = ops::gelu(layers::LayerNorm(ctx, prefix + ".conv.norm", y));
  y = layers::Linear(ctx, prefix + ".conv.pointwise2", y);
  x = ops::add(x, ctx.Dropout(y));

  y = layers::FeedForward(ctx, prefix + ".ff2", layers::LayerNorm(ctx, prefix + ".norm_ff2", x));
  x = ops::add(x, ops::scale(ctx.Dropout(y), 0.5));
  return layers::LayerNorm(ctx, prefix + ".norm_out", x);
}

EncoderOutput encode(ForwardContext& ctx, const Tensor& features, int valid_frames,
                     const EncoderConfig& config) {
  const int T = features.rows();
  if (valid_frames < 0 || valid_frames > T) valid_frames = T;
  Var x = ctx.tape.constant(features);
  Var h = subsample(ctx, x, valid_frames, config);
  const int L = h.value().rows();
  EncoderOutput out;
  out.valid_length = SubsampledLength(valid_frames);
  out.mask.assign(L, false);
  std::fill(out.mask.begin(), out.mask.begin() + out.valid_length, true);
  h = ctx.Dropout(ops::add(h, ctx.tape.constant(positional_encoding(L, config.d_model))));
  for (int b = 0; b < config.num_blocks; ++b) {
    h = conformer_block(ctx, "encoder.blocks." + std::to_string(b), h, out.valid_length, config);
  }
  out.h = h;
  return out;
}

}  // namespace cifasr
