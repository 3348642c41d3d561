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

#ifndef CIFASR_CONFIG_H_
#define CIFASR_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cifasr/corpus.h"
#include "cifasr/decode.h"
#include "cifasr/model.h"
#include "cifasr/train.h"

namespace cifasr {

enum class Scale { kPaper, kDesk };

// Full run configuration.  Defaults are the full-size recipe; the desk
// scale swaps in a model and schedule that train in minutes on one core.
struct RunConfig {
  Scale scale = Scale::kDesk;
  CorpusConfig data;
  std::filesystem::path corpus_dir = "corpus";
  ModelConfig model;  // vocabulary sizes are filled in from the lexicon
  TrainConfig train;
  TrainConfig adapt;
  DecodeConfig decode;
  std::filesystem::path work_dir = "runs";
  // Seeds of the character-unit vs syllable-unit comparison.
  std::vector<std::uint64_t> unit_seeds = {1, 2, 3, 4, 5};

  void Validate() const;
};

RunConfig PaperDefaults();
RunConfig DeskDefaults();
RunConfig DefaultConfig(Scale scale);

// Parses a JSON document.  "scale" picks the defaults, the sections data,
// model, train, adapt, decode, paths and experiment override them.  Unknown
// keys are a FormatError.  Relative paths resolve against `base_dir`.
RunConfig ParseConfig(const std::string& text, const std::filesystem::path& base_dir);
RunConfig LoadConfig(const std::filesystem::path& path);
// Inverse of ParseConfig (paths are written as given).
std::string ConfigJson(const RunConfig& config);

// Sets the vocabulary sizes of the model from a lexicon.
void BindVocabulary(RunConfig& config, const Lexicon& lex);

}  // namespace cifasr

#endif  // CIFASR_CONFIG_H_
