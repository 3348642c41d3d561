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

#ifndef CIFASR_MODEL_H_
#define CIFASR_MODEL_H_

#include <cstdint>
#include <span>

#include "cifasr/decoders.h"
#include "cifasr/encoder.h"
#include "cifasr/lexicon.h"
#include "cifasr/match.h"

namespace cifasr {

struct ModelConfig {
  EncoderConfig encoder;
  SyllableEncoderConfig syllable_encoder;
  DecoderConfig decoder;
  int char_vocab = 0;
  int syllable_vocab = 0;
  // Token kind fed to the syllable encoder.  kCharacter is the ablation that
  // matches acoustics against character embeddings.
  UnitKind match_unit = UnitKind::kSyllable;
  double cif_threshold = 1.0;
  // Block the MAE gradient into the syllable encoder.
  bool mae_stop_text_grad = false;

  int match_vocab() const {
    return match_unit == UnitKind::kSyllable ? syllable_vocab : char_vocab;
  }
  // Shared widths agree, vocabularies cover the specials.
  void Validate() const;
  // Small model that trains in minutes on one core.
  static ModelConfig Desk(int char_vocab, int syllable_vocab);
};

ModelParams InitModel(const ModelConfig& config, std::uint64_t seed);

// Everything the paired forward produces for one utterance.
struct PairedForward {
  EncoderOutput enc;
  Var ctc_log_probs;
  CifWeights weights;         // unscaled
  CifWeights scaled_weights;
  CifOutput cif;
  Var text;                   // syllable encoder output
  Var decoder_logits;
  LossTerms terms;
};

// Training-mode forward of one paired utterance: CIF scaled to the reference
// length, decoder over the integrated embeddings.
PairedForward paired_forward(ForwardContext& ctx, const ModelConfig& config,
                             const Tensor& features, std::span<const int> chars,
                             std::span<const int> syllables);

// Ids fed to the syllable encoder under the configured match unit.
std::span<const int> MatchUnits(const ModelConfig& config, std::span<const int> chars,
                                std::span<const int> syllables);

// Inference-mode acoustic pass: CTC log-probs and unscaled CIF memory.
struct AcousticForward {
  EncoderOutput enc;
  Var ctc_log_probs;
  CifWeights weights;
  CifOutput cif;
};

AcousticForward acoustic_forward(ForwardContext& ctx, const ModelConfig& config,
                                 const Tensor& features);

}  // namespace cifasr

#endif  // CIFASR_MODEL_H_
