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

#ifndef CIFASR_ENCODER_H_
#define CIFASR_ENCODER_H_

#include <random>
#include <string>
#include <vector>

#include "cifasr/layers.h"

namespace cifasr {

struct EncoderConfig {
  int feat_dim = 80;
  int num_blocks = 12;
  int d_model = 256;
  int num_heads = 4;
  int d_ffn = 2048;
  int conv_kernel = 15;
  double dropout = 0.1;

  int head_dim() const { return d_model / num_heads; }
  // d_model divisible by num_heads, odd conv kernel, positive sizes.
  void Validate() const;
};

struct EncoderOutput {
  Var h;                    // L×d_model
  std::vector<bool> mask;   // true on valid frames
  int valid_length = 0;

  int length() const { return static_cast<int>(mask.size()); }
};

// Output length of the two stride-2 subsampling convolutions:
// floor((floor((T−1)/2)+1−1)/2)+1.
int SubsampledLength(int frames);

void InitEncoderParams(ModelParams& params, const EncoderConfig& config, std::mt19937_64& rng);

// conv(k3,s2,p1) → GELU → conv(k3,s2,p1) → GELU → linear.  Frames at index
// ≥ valid_frames are zeroed before each convolution.
Var subsample(ForwardContext& ctx, const Var& x, int valid_frames, const EncoderConfig& config);

// Pre-norm macaron block: ½FFN, masked self-attention, convolution module,
// ½FFN, final layer norm.  Rows ≥ valid_len are padding.
Var conformer_block(ForwardContext& ctx, const std::string& prefix, const Var& h, int valid_len,
                    const EncoderConfig& config);

// subsample → positional encoding → conformer blocks.  `features` may carry
// time padding after valid_frames rows; pass -1 when it has none.
EncoderOutput encode(ForwardContext& ctx, const Tensor& features, int valid_frames,
                     const EncoderConfig& config);

}  // namespace cifasr

#endif  // CIFASR_ENCODER_H_
