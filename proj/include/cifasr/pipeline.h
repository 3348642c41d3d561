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

#ifndef CIFASR_PIPELINE_H_
#define CIFASR_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cifasr/config.h"

namespace cifasr {

// Progress lines for long runs; null means silent.
using Logger = std::function<void(const std::string&)>;

struct StageResult {
  std::vector<EpochRecord> log;
  std::vector<EpochRecord> best;
  std::filesystem::path averaged;  // out_dir/averaged.ckpt
  ModelParams params;              // the averaged parameters
};

// Stage 1 from a fresh initialisation seeded by config.train.seed.
StageResult RunPairedStage(const RunConfig& config, const Corpus& corpus,
                           const std::filesystem::path& out_dir, const Logger& log = {});

// Stage 2 from `init`.  `on_epoch` sees every epoch checkpoint's parameters
// before the next epoch starts.
StageResult RunTextOnlyStage(const RunConfig& config, const Corpus& corpus, const ModelParams& init,
                             const std::filesystem::path& out_dir, const Logger& log = {},
                             const std::function<void(const EpochRecord&, ModelParams&)>& on_epoch = {});

// Averages the best `k` checkpoints of a metric log and writes the result.
ModelParams AverageBest(std::span<const EpochRecord> log, int k, const std::filesystem::path& out);

struct DomainCer {
  double source = 0.0;
  double target = 0.0;
};

DomainCer EvaluateDomains(const RunConfig& config, const Corpus& corpus, ModelParams& params);

struct EpochCer {
  int epoch = 0;
  double source = 0.0;
  double target = 0.0;
  double dev_loss = 0.0;
};

struct UnitComparison {
  std::uint64_t seed = 0;
  DomainCer syllable_baseline;
  DomainCer syllable_adapted;
  DomainCer character_baseline;
  DomainCer character_adapted;
};

struct ExperimentReport {
  DomainCer baseline;
  DomainCer adapted;
  // Same adaptation without source paired batches (ρ = 0).
  DomainCer adapted_no_paired;
  bool has_no_paired = false;
  bool frozen_bit_identical = false;
  std::vector<EpochCer> series;
  std::vector<UnitComparison> units;
  // Wall time of corpus generation plus the main run; `seconds` is the total.
  double main_seconds = 0.0;
  double seconds = 0.0;
};

struct ExperimentOptions {
  bool run_no_paired_ablation = true;
  bool run_unit_comparison = true;
};

// gen-data → train → eval → adapt (evaluating every epoch checkpoint) → eval,
// then the character-unit vs syllable-unit comparison over config.unit_seeds.
ExperimentReport RunExperiment(const RunConfig& config, const std::filesystem::path& out_dir,
                               const ExperimentOptions& options = {}, const Logger& log = {});

std::string ReportMarkdown(const ExperimentReport& report, const RunConfig& config);
std::string ReportJson(const ExperimentReport& report);
ExperimentReport ParseReportJson(const std::string& text);

}  // namespace cifasr

#endif  // CIFASR_PIPELINE_H_
