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

#ifndef CIFASR_CORPUS_H_
#define CIFASR_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cifasr/synth.h"

namespace cifasr {

// Sizes of the sets of a generated corpus.  Sets without audio carry text
// only.
struct CorpusSizes {
  int source_train = 2000;
  int source_dev = 200;
  int source_test = 200;
  int target_text = 2000;
  int target_dev = 200;
  int target_test = 200;
};

struct CorpusConfig {
  int num_chars = 40;
  int num_syllables = 24;
  int successors = 3;
  int min_length = 5;
  int max_length = 10;
  int feat_dim = 16;
  int min_duration = 8;
  int max_duration = 16;
  double noise_std = 0.3;
  CorpusSizes sizes;
  std::uint64_t seed = 1;

  void Validate() const;
};

inline constexpr const char* kSourceTrain = "source_train";
inline constexpr const char* kSourceDev = "source_dev";
inline constexpr const char* kSourceTest = "source_test";
inline constexpr const char* kTargetText = "target_text";
inline constexpr const char* kTargetDev = "target_dev";
inline constexpr const char* kTargetTest = "target_test";

struct Corpus {
  CorpusConfig config;
  Lexicon lexicon;
  DomainSpec source;
  DomainSpec target;
  AcousticModelSpec acoustic;
  std::map<std::string, std::vector<Utterance>> sets;

  const std::vector<Utterance>& Set(const std::string& name) const;
};

// Both domains share the lexicon and the acoustic model; only the bigram
// tables differ.  Every set is drawn from its own derived seed.
Corpus GenerateCorpus(const CorpusConfig& config);

// Layout: lexicon.tsv, spec.json (config, seeds, bigram tables, prototypes),
// and one directory per set as written by WriteUtteranceSet.
void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus LoadCorpus(const std::filesystem::path& dir);

}  // namespace cifasr

#endif  // CIFASR_CORPUS_H_
