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

#ifndef CIFASR_DECODE_H_
#define CIFASR_DECODE_H_

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cifasr/model.h"
#include "cifasr/synth.h"

namespace cifasr {

struct Hypothesis {
  std::vector<int> ids;
  double ctc_score = 0.0;
  double att_score = 0.0;
  double combined = 0.0;
};

struct DecodeConfig {
  int beam = 10;
  int nbest = 10;
  // Weight of the CTC score in the combined score.
  double ctc_weight = 0.5;
  // Added per output token to the combined score.
  double length_bonus = 0.0;
  // Skip the second pass and return the CTC 1-best.
  bool ctc_only = false;

  void Validate() const;
};

// Prefix beam search over the first frame_len rows (all rows when -1).
// Returns at most `beam` prefixes, best CTC log-probability first.
std::vector<Hypothesis> ctc_prefix_beam_search(const Tensor& log_probs, int beam,
                                               int frame_len = -1);

// Teacher-forced decoder log-likelihood of ids + eos over `memory`.
double attention_score(ForwardContext& ctx, const Var& memory, std::span<const int> ids,
                       const DecoderConfig& config);

// Scores every hypothesis with the decoder, sets combined =
// ctc_weight·ctc + (1 − ctc_weight)·att + length_bonus·|ids| and sorts best
// first.  Ties keep the incoming order.
std::vector<Hypothesis> attention_rescore(std::vector<Hypothesis> nbest, ForwardContext& ctx,
                                          const Var& memory, const DecoderConfig& decoder,
                                          double ctc_weight, double length_bonus = 0.0);

struct CerReport {
  int substitutions = 0;
  int deletions = 0;
  int insertions = 0;
  int ref_length = 0;

  int errors() const { return substitutions + deletions + insertions; }
  // (S + D + I) / N; with N = 0 the hypothesis length is returned.
  double cer() const;
  CerReport& operator+=(const CerReport& other);
};

// Unit-cost Levenshtein alignment.  Among optimal alignments the backtrace
// prefers a substitution (or match) over an insertion/deletion pair.
CerReport cer(std::span<const int> ref, std::span<const int> hyp);

struct UtteranceResult {
  std::string id;
  std::vector<int> ref;
  std::vector<int> hyp;
  CerReport report;
};

struct EvalResult {
  CerReport corpus;  // utterances with an empty reference are left out
  int skipped_empty_refs = 0;
  std::vector<UtteranceResult> utterances;

  double cer() const { return corpus.cer(); }
};

// Decodes one utterance: CTC n-best, then rescoring over unscaled CIF memory.
std::vector<int> decode_utterance(const ModelConfig& model, ModelParams& params,
                                  const Tensor& features, const DecodeConfig& config);

EvalResult evaluate(std::span<const Utterance> dataset, const ModelConfig& model,
                    ModelParams& params, const DecodeConfig& config);

// "utt_id<TAB>ref<TAB>hyp<TAB>cer" per utterance.
void WriteResults(const std::filesystem::path& path, const EvalResult& result, const Lexicon& lex);
std::string SummaryJson(const EvalResult& result);

}  // namespace cifasr

#endif  // CIFASR_DECODE_H_
