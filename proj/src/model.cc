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

#include "cifasr/model.h"

#include <random>

#include "cifasr/errors.h"

namespace cifasr {

void ModelConfig::Validate() const {
  encoder.Validate();
  if (syllable_encoder.d_model != encoder.d_model || decoder.d_model != encoder.d_model) {
    throw ContractError("model config: encoder, syllable encoder and decoder widths differ");
  }
  if (syllable_encoder.d_model % syllable_encoder.num_heads != 0 ||
      decoder.d_model % decoder.num_heads != 0) {
    throw ContractError("model config: d_model not divisible by num_heads");
  }
  if (char_vocab <= kNumSpecialIds || syllable_vocab <= kNumSpecialIds) {
    throw ContractError("model config: vocabularies must extend past the special ids");
  }
  if (!(cif_threshold > 0.0)) throw ContractError("model config: cif threshold must be positive");
  if (decoder.label_smoothing < 0.0 || decoder.label_smoothing >= 1.0) {
    throw ContractError("model config: label smoothing outside [0,1)");
  }
}

ModelConfig ModelConfig::Desk(int char_vocab, int syllable_vocab) {
  ModelConfig c;
  c.encoder = EncoderConfig{.feat_dim = 16, .num_blocks = 2, .d_model = 64, .num_heads = 4,
                            .d_ffn = 256, .conv_kernel = 7, .dropout = 0.1};
  c.syllable_encoder = SyllableEncoderConfig{.num_blocks = 2, .d_model = 64, .num_heads = 4,
                                             .d_ffn = 256, .dropout = 0.1};
  c.decoder = DecoderConfig{.num_blocks = 2, .d_model = 64, .num_heads = 4, .d_ffn = 256,
                            .dropout = 0.1, .label_smoothing = 0.1};
  c.char_vocab = char_vocab;
  c.syllable_vocab = syllable_vocab;
  return c;
}

ModelParams InitModel(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  ModelParams params;
  const int d = config.encoder.d_model;
  InitEncoderParams(params, config.encoder, rng);
  InitCifWeightParams(params, d, rng);
  InitSyllableEncoderParams(params, config.syllable_encoder, config.match_vocab(), rng);
  InitCtcHead(params, d, config.char_vocab, rng);
  InitCeHead(params, d, config.char_vocab, rng);
  InitAttentionDecoder(params, config.decoder, config.char_vocab, rng);
  return params;
}

std::span<const int> MatchUnits(const ModelConfig& config, std::span<const int> chars,
                                std::span<const int> syllables) {
  return config.match_unit == UnitKind::kSyllable ? syllables : chars;
}

PairedForward paired_forward(ForwardContext& ctx, const ModelConfig& config,
                             const Tensor& features, std::span<const int> chars,
                             std::span<const int> syllables) {
  if (chars.empty() || chars.size() != syllables.size()) {
    throw ContractError("paired_forward: " + std::to_string(chars.size()) + " characters, " +
                        std::to_string(syllables.size()) + " syllables");
  }
  const int I = static_cast<int>(chars.size());
  PairedForward f;
  f.enc = encode(ctx, features, -1, config.encoder);
  f.ctc_log_probs = ctc_log_probs(ctx, f.enc.h);
  f.terms.ctc = ctc_loss(f.ctc_log_probs, chars, f.enc.valid_length);

  f.weights = cif_weights(ctx, f.enc.h, f.enc.valid_length);
  f.terms.qua = quantity_loss(f.weights, I);
  f.scaled_weights = scale_weights(f.weights, I);
  f.cif = cif_fire(f.enc.h, f.scaled_weights, CifOptions{.threshold = config.cif_threshold});
  if (f.cif.num_fires() != I) {
    throw ContractError("paired_forward: scaled CIF fired " + std::to_string(f.cif.num_fires()) +
                        " times for " + std::to_string(I) + " tokens");
  }
  f.terms.ce = ce_loss(ctx, f.cif.c, chars);

  f.text = syllable_encode(ctx, MatchUnits(config, chars, syllables), config.syllable_encoder);
  Var text_target = f.text;
  if (config.mae_stop_text_grad) text_target = ctx.tape.constant(f.text.value());
  f.terms.mae = mae_loss(f.cif.c, text_target);

  f.decoder_logits = attention_decoder_forward(ctx, f.cif.c, chars, config.decoder);
  f.terms.aed = aed_loss(f.decoder_logits, chars, config.decoder.label_smoothing);
  return f;
}

AcousticForward acoustic_forward(ForwardContext& ctx, const ModelConfig& config,
                                 const Tensor& features) {
  AcousticForward f;
  f.enc = encode(ctx, features, -1, config.encoder);
  f.ctc_log_probs = ctc_log_probs(ctx, f.enc.h);
  f.weights = cif_weights(ctx, f.enc.h, f.enc.valid_length);
  f.cif = cif_fire(f.enc.h, f.weights,
                   CifOptions{.threshold = config.cif_threshold, .force_nonempty = true});
  return f;
}

}  // namespace cifasr
