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

#ifndef CIFASR_SYNTH_H_
#define CIFASR_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cifasr/lexicon.h"
#include "cifasr/tensor.h"

namespace cifasr {

// Text domain: a first-order Markov chain over the non-special characters.
// Row i of `transitions` is the successor distribution of character id
// kNumSpecialIds + i.  The first character is drawn uniformly.
struct DomainSpec {
  std::vector<std::vector<double>> transitions;
  int min_length = 5;
  int max_length = 10;
  std::uint64_t seed = 0;

  int num_chars() const { return static_cast<int>(transitions.size()); }
  // Throws ContractError on a row that is not a distribution (±1e-9).
  void Validate() const;
};

// Per-syllable prototype frames plus a duration and noise model.  Row i of
// `prototypes` belongs to syllable id kNumSpecialIds + i.
struct AcousticModelSpec {
  std::vector<std::vector<double>> prototypes;
  int min_duration = 8;
  int max_duration = 16;
  double noise_std = 0.3;
  std::uint64_t seed = 0;

  int feat_dim() const { return prototypes.empty() ? 0 : static_cast<int>(prototypes[0].size()); }
  double MinPrototypeDistance() const;
  void Validate() const;
};

// Prototypes drawn from N(0, 1) per dimension, redrawn until every pair is
// more than 4·noise_std apart.
AcousticModelSpec MakeAcousticModel(int num_syllables, int feat_dim, int min_duration,
                                    int max_duration, double noise_std, std::uint64_t seed);

// Sparse random bigram domain: each character gets `successors` successors
// with Dirichlet(1) weights.  Successors never share the current character's
// syllable, so two adjacent tokens are always acoustically distinct.
DomainSpec MakeSparseDomain(const Lexicon& lex, int successors, int min_length, int max_length,
                            std::uint64_t seed);

// Synthetic lexicon with `num_chars` single-code-point characters over
// `num_syllables` pinyin-like syllables.  The first num_syllables characters
// take one syllable each; the rest are homophones of randomly chosen
// syllables.
Lexicon MakeSyntheticLexicon(int num_chars, int num_syllables, std::uint64_t seed);

std::vector<TokenSeq> gen_corpus(const DomainSpec& domain, int n_utts, const Lexicon& lex);

struct SynthesizedFeatures {
  Tensor features;             // T×F
  std::vector<int> durations;  // frames per syllable
};

SynthesizedFeatures synth_features(const TokenSeq& syllables, const AcousticModelSpec& acoustic,
                                   std::uint64_t seed);

// Mask widths are drawn uniformly from [min, max].
struct SpecAugmentConfig {
  int num_time_masks = 0;
  int min_time_width = 0;
  int max_time_width = 0;
  int num_freq_masks = 0;
  int min_freq_width = 0;
  int max_freq_width = 0;
};

// Masked cells take the utterance mean of their feature dimension.  The input
// is not modified.
Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& config, std::uint64_t seed);

struct Utterance {
  std::string id;
  Tensor features;  // empty for text-only data
  TokenSeq chars;
  TokenSeq syllables;

  bool has_features() const { return !features.empty(); }
  int num_frames() const { return has_features() ? features.rows() : 0; }
};

inline constexpr int kPadId = -1;

struct Batch {
  Tensor features;  // B×T_max×F, time-padded with the pad value
  std::vector<int> frame_lengths;
  std::vector<std::vector<int>> chars;  // padded with kPadId
  std::vector<std::vector<int>> syllables;
  std::vector<int> token_lengths;
  std::vector<std::string> ids;

  int size() const { return static_cast<int>(ids.size()); }
  // Unpadded frames of item b.
  Tensor Features(int b) const;
  TokenSeq Chars(int b) const;
  TokenSeq Syllables(int b) const;
};

// Consecutive groups of batch_size utterances.  Text-only utterances produce
// batches with an empty feature tensor.
std::vector<Batch> make_batches(std::span<const Utterance> utts, int batch_size,
                                double pad_value = 0.0);

// Corpus sets on disk: text.tsv ("utt_id<TAB>text"), and for paired sets
// feats.bin (float64 little-endian rows) with feats.idx
// ("utt_id<TAB>offset<TAB>T<TAB>F", offset in values).
void WriteUtteranceSet(const std::filesystem::path& dir, std::span<const Utterance> utts,
                       const Lexicon& lex);
std::vector<Utterance> ReadUtteranceSet(const std::filesystem::path& dir, const Lexicon& lex);

std::vector<std::pair<std::string, std::string>> ReadTranscripts(const std::filesystem::path& path);
void WriteTranscripts(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& rows);

}  // namespace cifasr

#endif  // CIFASR_SYNTH_H_
