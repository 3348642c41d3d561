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

#ifndef CIFASR_TRAIN_H_
#define CIFASR_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cifasr/model.h"
#include "cifasr/optim.h"
#include "cifasr/synth.h"

namespace cifasr {

enum class Stage { kPaired, kTextOnly };

std::string StageName(Stage stage);

struct TrainConfig {
  Stage stage = Stage::kPaired;
  LossWeights weights;
  AdamConfig adam;
  double clip_norm = 5.0;
  int accum_steps = 4;
  int epochs = 30;
  int batch_size = 12;
  std::uint64_t seed = 1;
  // Checkpoints averaged after training.
  int keep_best = 5;
  // Text-only stage: probability that a step draws a source paired batch.
  double paired_ratio = 0.3;
  SpecAugmentConfig augment;

  void Validate() const;
};

// One line of the metric log.
struct EpochRecord {
  Stage stage = Stage::kPaired;
  int epoch = 0;
  int updates = 0;
  int paired_batches = 0;
  int text_batches = 0;
  LossBundle train;       // mean over the epoch's paired utterances
  double train_text = 0;  // mean text-only loss over the epoch
  double dev_loss = 0;
  std::string checkpoint;
  double seconds = 0;
};

std::string EpochRecordJson(const EpochRecord& r);
EpochRecord ParseEpochRecord(const std::string& line);
std::vector<EpochRecord> ReadMetricLog(const std::filesystem::path& path);

// Called after each epoch's checkpoint is written.
using EpochCallback = std::function<void(const EpochRecord&)>;

struct TrainArtifacts {
  std::filesystem::path out_dir;
  // Write epoch_NNN.ckpt and metrics.jsonl under out_dir.  When false only
  // the in-memory records are produced.
  bool write_files = true;
  EpochCallback on_epoch;
};

// Mean joint loss over a paired set in eval mode (dropout off, CIF scaled to
// the reference length).
LossBundle paired_dev_loss(const ModelConfig& model, const TrainConfig& config,
                           ModelParams& params, std::span<const Utterance> dev);
// Mean text-only loss over a text set in eval mode.
double text_dev_loss(const ModelConfig& model, const TrainConfig& config, ModelParams& params,
                     std::span<const Utterance> dev);

// Stage 1.  Each micro-batch backpropagates the mean joint loss of its
// utterances; every accum_steps micro-batches the gradient is clipped and
// Adam steps.  A trailing partial accumulation group is applied too.
std::vector<EpochRecord> train_paired(const ModelConfig& model, const TrainConfig& config,
                                      std::span<const Utterance> train,
                                      std::span<const Utterance> dev, ModelParams& params,
                                      const TrainArtifacts& artifacts);

// Leaves only decoder.* trainable.
void freeze_for_text_only(ModelParams& params);

// Stage 2.  Each micro-batch is, with probability paired_ratio, a random
// source paired batch whose AED term is backpropagated, and otherwise the
// next target text batch.  An epoch ends when the text batches run out.
// Uses a fresh optimizer state.
std::vector<EpochRecord> adapt_text_only(const ModelConfig& model, const TrainConfig& config,
                                         std::span<const Utterance> target_text,
                                         std::span<const Utterance> target_dev,
                                         std::span<const Utterance> source_paired,
                                         ModelParams& params, const TrainArtifacts& artifacts);

// The k lowest-dev-loss records; ties go to the earlier epoch.  Result is in
// ascending dev-loss order.
std::vector<EpochRecord> select_best(std::span<const EpochRecord> log, int k);

ModelParams average_checkpoints(std::span<const std::filesystem::path> paths);

}  // namespace cifasr

#endif  // CIFASR_TRAIN_H_
