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

#ifndef CIFASR_DECODERS_H_
#define CIFASR_DECODERS_H_

#include <random>
#include <span>
#include <vector>

#include "cifasr/layers.h"
#include "cifasr/match.h"

namespace cifasr {

struct DecoderConfig {
  int num_blocks = 6;
  int d_model = 256;
  int num_heads = 4;
  int d_ffn = 2048;
  double dropout = 0.1;
  double label_smoothing = 0.1;
};

// Weights of the five training terms.
struct LossWeights {
  double ctc = 0.5;
  double qua = 1.0;
  double ce = 0.5;
  double aed = 1.0;
  double mae = 1.0;

  void Validate() const;
};

struct LossBundle {
  double ctc = 0.0;
  double qua = 0.0;
  double ce = 0.0;
  double aed = 0.0;
  double mae = 0.0;
  double total = 0.0;
};

// Differentiable terms of one utterance.  Invalid entries count as zero.
struct LossTerms {
  Var ctc, qua, ce, aed, mae;

  LossBundle Values() const;
};

void InitCtcHead(ModelParams& params, int d_model, int vocab, std::mt19937_64& rng);
void InitCeHead(ModelParams& params, int d_model, int vocab, std::mt19937_64& rng);
void InitAttentionDecoder(ModelParams& params, const DecoderConfig& config, int vocab,
                          std::mt19937_64& rng);

// linear → log_softmax over the vocabulary (blank at 0).
Var ctc_log_probs(ForwardContext& ctx, const Var& h);

// −log P(target | log_probs) summed over all blank-augmented alignments of the
// first frame_len rows.  Pass frame_len = -1 for all rows.  Throws
// InfeasibleAlignmentError when no alignment fits.
Var ctc_loss(const Var& log_probs, std::span<const int> target, int frame_len = -1);

// Mean per-position cross-entropy of linear(c) against the characters.
Var ce_loss(ForwardContext& ctx, const Var& c, std::span<const int> chars);

// Teacher-forced decoder over input [sos, y…]; returns (|y|+1)×V logits.
Var attention_decoder_forward(ForwardContext& ctx, const Var& memory, std::span<const int> y,
                              const DecoderConfig& config);

// Label-smoothed cross-entropy of the logits against [y…, eos].
Var aed_loss(const Var& logits, std::span<const int> y, double label_smoothing);

// total = α·ctc + β·qua + γ·ce + λ·aed + δ·mae.
LossBundle joint_loss(const LossBundle& terms, const LossWeights& weights);
Var joint_loss(const LossTerms& terms, const LossWeights& weights);

// AED loss with the syllable encoder output standing in for the CIF output.
Var text_only_loss(ForwardContext& ctx, std::span<const int> syllables, std::span<const int> chars,
                   const SyllableEncoderConfig& syllable_config,
                   const DecoderConfig& decoder_config);

}  // namespace cifasr

#endif  // CIFASR_DECODERS_H_
