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

#include "cifasr/train.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

std::vector<std::vector<int>> ShuffledBatches(int n, int batch_size, std::mt19937_64& rng) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<int>> batches;
  for (int i = 0; i < n; i += batch_size) {
    batches.emplace_back(order.begin() + i, order.begin() + std::min(n, i + batch_size));
  }
  return batches;
}

Tensor Augmented(const Tensor& features, const SpecAugmentConfig& config, std::mt19937_64& rng) {
  if (config.num_time_masks == 0 && config.num_freq_masks == 0) return features;
  SpecAugmentConfig c = config;
  c.max_time_width = std::min(c.max_time_width, features.rows() / 4);
  c.min_time_width = std::min(c.min_time_width, c.max_time_width);
  c.max_freq_width = std::min(c.max_freq_width, features.cols());
  c.min_freq_width = std::min(c.min_freq_width, c.max_freq_width);
  return spec_augment(features, c, rng());
}

LossBundle Accumulate(const LossBundle& sum, const LossBundle& x) {
  return LossBundle{sum.ctc + x.ctc, sum.qua + x.qua, sum.ce + x.ce,
                    sum.aed + x.aed, sum.mae + x.mae, sum.total + x.total};
}

LossBundle Divide(const LossBundle& sum, double n) {
  if (n == 0) return sum;
  return LossBundle{sum.ctc / n, sum.qua / n, sum.ce / n, sum.aed / n, sum.mae / n, sum.total / n};
}

std::filesystem::path CheckpointPath(const std::filesystem::path& dir, int epoch) {
  char name[32];
  std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
  return dir / name;
}

json BundleJson(const LossBundle& b) {
  return json{{"ctc", b.ctc}, {"qua", b.qua}, {"ce", b.ce},
              {"aed", b.aed}, {"mae", b.mae}, {"total", b.total}};
}

LossBundle ParseBundle(const json& j) {
  return LossBundle{j.at("ctc"), j.at("qua"), j.at("ce"), j.at("aed"), j.at("mae"), j.at("total")};
}

// Applies clip + Adam once `pending` micro-batches have been accumulated.
class Updater {
 public:
  Updater(ModelParams& params, const TrainConfig& config)
      : params_(params), config_(config), state_(config.adam) {}

  // Scale for one utterance's loss inside the micro-batch that starts now.
  double Seed(int batch_items, int remaining_batches) {
    if (in_group_ == 0) group_size_ = std::min(config_.accum_steps, remaining_batches);
    return 1.0 / (static_cast<double>(batch_items) * group_size_);
  }

  // Returns true when an optimizer step was taken.
  bool Finish() {
    if (++in_group_ < group_size_) return false;
    in_group_ = 0;
    clip_grad_norm(params_, config_.clip_norm);
    adam_step(params_, state_);
    return true;
  }

 private:
  ModelParams& params_;
  const TrainConfig& config_;
  AdamState state_;
  int in_group_ = 0;
  int group_size_ = 1;
};

class MetricWriter {
 public:
  explicit MetricWriter(const TrainArtifacts& artifacts) : artifacts_(artifacts) {
    if (!artifacts.write_files) return;
    std::filesystem::create_directories(artifacts.out_dir);
    out_.open(artifacts.out_dir / "metrics.jsonl", std::ios::trunc);
    if (!out_) throw Error("cannot write " + (artifacts.out_dir / "metrics.jsonl").string());
  }

  void Emit(EpochRecord& record, const ModelParams& params) {
    if (artifacts_.write_files) {
      const auto path = CheckpointPath(artifacts_.out_dir, record.epoch);
      SaveCheckpoint(params, path);
      record.checkpoint = path.string();
      out_ << EpochRecordJson(record) << '\n';
      out_.flush();
    }
    if (artifacts_.on_epoch) artifacts_.on_epoch(record);
  }

 private:
  const TrainArtifacts& artifacts_;
  std::ofstream out_;
};

}  // namespace

std::string StageName(Stage stage) { return stage == Stage::kPaired ? "paired" : "text_only"; }

void TrainConfig::Validate() const {
  weights.Validate();
  if (clip_norm <= 0 || accum_steps < 1 || epochs < 0 || batch_size < 1 || keep_best < 1) {
    throw ContractError("train config: clip, accum_steps, batch_size and keep_best must be positive");
  }
  if (!(paired_ratio >= 0.0 && paired_ratio <= 1.0)) {
    throw ContractError("train config: paired_ratio outside [0,1]");
  }
  if (adam.warmup_steps < 1 || !(adam.base_lr > 0)) {
    throw ContractError("train config: warmup and base_lr must be positive");
  }
}

std::string EpochRecordJson(const EpochRecord& r) {
  return json{{"stage", StageName(r.stage)},
              {"epoch", r.epoch},
              {"updates", r.updates},
              {"paired_batches", r.paired_batches},
              {"text_batches", r.text_batches},
              {"train", BundleJson(r.train)},
              {"train_text", r.train_text},
              {"dev_loss", r.dev_loss},
              {"checkpoint", r.checkpoint},
              {"seconds", r.seconds}}
      .dump();
}

EpochRecord ParseEpochRecord(const std::string& line) {
  try {
    const json j = json::parse(line);
    EpochRecord r;
    const std::string stage = j.at("stage");
    if (stage != "paired" && stage != "text_only") throw FormatError("unknown stage " + stage);
    r.stage = stage == "paired" ? Stage::kPaired : Stage::kTextOnly;
    r.epoch = j.at("epoch");
    r.updates = j.at("updates");
    r.paired_batches = j.at("paired_batches");
    r.text_batches = j.at("text_batches");
    r.train = ParseBundle(j.at("train"));
    r.train_text = j.at("train_text");
    r.dev_loss = j.at("dev_loss");
    r.checkpoint = j.at("checkpoint");
    r.seconds = j.at("seconds");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("metric log: ") + e.what());
  }
}

std::vector<EpochRecord> ReadMetricLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read metric log " + path.string());
  std::vector<EpochRecord> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(ParseEpochRecord(line));
  }
  return records;
}

LossBundle paired_dev_loss(const ModelConfig& model, const TrainConfig& config,
                           ModelParams& params, std::span<const Utterance> dev) {
  LossBundle sum;
  for (const Utterance& u : dev) {
    Tape tape(false);
    ForwardContext ctx{tape, params};
    PairedForward f = paired_forward(ctx, model, u.features, u.chars.ids, u.syllables.ids);
    sum = Accumulate(sum, joint_loss(f.terms.Values(), config.weights));
  }
  return Divide(sum, static_cast<double>(dev.size()));
}

double text_dev_loss(const ModelConfig& model, const TrainConfig&, ModelParams& params,
                     std::span<const Utterance> dev) {
  double sum = 0.0;
  for (const Utterance& u : dev) {
    Tape tape(false);
    ForwardContext ctx{tape, params};
    sum += text_only_loss(ctx, MatchUnits(model, u.chars.ids, u.syllables.ids), u.chars.ids,
                          model.syllable_encoder, model.decoder)
               .value()
               .item();
  }
  return dev.empty() ? 0.0 : sum / static_cast<double>(dev.size());
}

std::vector<EpochRecord> train_paired(const ModelConfig& model, const TrainConfig& config,
                                      std::span<const Utterance> train,
                                      std::span<const Utterance> dev, ModelParams& params,
                                      const TrainArtifacts& artifacts) {
  config.Validate();
  model.Validate();
  if (train.empty()) throw ContractError("train_paired: empty training set");
  for (const Utterance& u : train) {
    if (!u.has_features()) throw ContractError("train_paired: utterance " + u.id + " has no audio");
  }
  std::vector<EpochRecord> records;
  if (config.epochs == 0) return records;

  std::mt19937_64 rng(config.seed);
  Updater updater(params, config);
  MetricWriter writer(artifacts);
  params.ZeroGrad();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord record;
    record.stage = Stage::kPaired;
    record.epoch = epoch;
    const auto batches = ShuffledBatches(static_cast<int>(train.size()), config.batch_size, rng);
    LossBundle sum;
    int items = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const double seed =
          updater.Seed(static_cast<int>(batches[b].size()), static_cast<int>(batches.size() - b));
      for (int idx : batches[b]) {
        const Utterance& u = train[idx];
        Tensor feats = Augmented(u.features, config.augment, rng);
        Tape tape;
        ForwardContext ctx{tape, params, &rng, model.encoder.dropout};
        PairedForward f = paired_forward(ctx, model, feats, u.chars.ids, u.syllables.ids);
        Var total = joint_loss(f.terms, config.weights);
        tape.backward(total, seed);
        sum = Accumulate(sum, joint_loss(f.terms.Values(), config.weights));
        ++items;
      }
      ++record.paired_batches;
      if (updater.Finish()) ++record.updates;
    }
    record.train = Divide(sum, items);
    record.dev_loss = dev.empty() ? record.train.total
                                  : paired_dev_loss(model, config, params, dev).total;
    record.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    writer.Emit(record, params);
    records.push_back(record);
  }
  return records;
}

void freeze_for_text_only(ModelParams& params) {
  for (auto& p : params) p->trainable = HasPrefix(p->name, "decoder.");
}

std::vector<EpochRecord> adapt_text_only(const ModelConfig& model, const TrainConfig& config,
                                         std::span<const Utterance> target_text,
                                         std::span<const Utterance> target_dev,
                                         std::span<const Utterance> source_paired,
                                         ModelParams& params, const TrainArtifacts& artifacts) {
  config.Validate();
  model.Validate();
  if (target_text.empty()) throw ContractError("adapt_text_only: empty target text");
  if (config.paired_ratio > 0 && source_paired.empty()) {
    throw ContractError("adapt_text_only: paired_ratio > 0 needs source paired data");
  }
  std::vector<EpochRecord> records;
  if (config.epochs == 0) return records;

  std::mt19937_64 rng(config.seed);
  std::bernoulli_distribution draw_paired(config.paired_ratio);
  Updater updater(params, config);
  MetricWriter writer(artifacts);
  params.ZeroGrad();
  const int num_source_batches =
      (static_cast<int>(source_paired.size()) + config.batch_size - 1) / config.batch_size;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = Clock::now();
    EpochRecord record;
    record.stage = Stage::kTextOnly;
    record.epoch = epoch;
    const auto text_batches =
        ShuffledBatches(static_cast<int>(target_text.size()), config.batch_size, rng);
    std::size_t next_text = 0;
    LossBundle paired_sum;
    double text_sum = 0.0;
    int paired_items = 0, text_items = 0;
    while (next_text < text_batches.size()) {
      const bool paired = config.paired_ratio > 0 && draw_paired(rng);
      // Remaining micro-batches are unknown with interleaving; the text count
      // bounds the epoch, so group sizes are computed from it.
      const int remaining = static_cast<int>(text_batches.size() - next_text);
      if (paired) {
        const int first =
            std::uniform_int_distribution<int>(0, num_source_batches - 1)(rng) * config.batch_size;
        const int last = std::min<int>(first + config.batch_size, source_paired.size());
        const double seed = updater.Seed(last - first, remaining);
        for (int i = first; i < last; ++i) {
          const Utterance& u = source_paired[i];
          Tape tape;
          ForwardContext ctx{tape, params, &rng, model.decoder.dropout};
          PairedForward f = paired_forward(ctx, model, u.features, u.chars.ids, u.syllables.ids);
          tape.backward(f.terms.aed, seed);
          paired_sum = Accumulate(paired_sum, joint_loss(f.terms.Values(), config.weights));
          ++paired_items;
        }
        ++record.paired_batches;
      } else {
        const auto& batch = text_batches[next_text++];
        const double seed = updater.Seed(static_cast<int>(batch.size()), remaining);
        for (int idx : batch) {
          const Utterance& u = target_text[idx];
          Tape tape;
          ForwardContext ctx{tape, params, &rng, model.decoder.dropout};
          Var loss = text_only_loss(ctx, MatchUnits(model, u.chars.ids, u.syllables.ids),
                                    u.chars.ids, model.syllable_encoder, model.decoder);
          tape.backward(loss, seed);
          text_sum += loss.value().item();
          ++text_items;
        }
        ++record.text_batches;
      }
      if (updater.Finish()) ++record.updates;
    }
    record.train = Divide(paired_sum, paired_items);
    record.train_text = text_sum / std::max(1, text_items);
    record.dev_loss = target_dev.empty() ? record.train_text
                                         : text_dev_loss(model, config, params, target_dev);
    record.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    writer.Emit(record, params);
    records.push_back(record);
  }
  return records;
}

std::vector<EpochRecord> select_best(std::span<const EpochRecord> log, int k) {
  if (k < 1) throw ContractError("select_best: k must be positive");
  if (k > static_cast<int>(log.size())) {
    throw ContractError("select_best: k = " + std::to_string(k) + " but only " +
                        std::to_string(log.size()) + " checkpoints");
  }
  std::vector<EpochRecord> sorted(log.begin(), log.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const EpochRecord& a, const EpochRecord& b) {
    if (a.dev_loss != b.dev_loss) return a.dev_loss < b.dev_loss;
    return a.epoch < b.epoch;
  });
  sorted.resize(k);
  return sorted;
}

ModelParams average_checkpoints(std::span<const std::filesystem::path> paths) {
  if (paths.empty()) throw ContractError("average_checkpoints: no checkpoints");
  std::vector<ModelParams> sets;
  sets.reserve(paths.size());
  for (const auto& p : paths) sets.push_back(LoadCheckpoint(p));
  return AverageParams(sets);
}

}  // namespace cifasr
