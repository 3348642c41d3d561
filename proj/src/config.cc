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

#include "cifasr/config.h"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

using json = nlohmann::json;

// Reads keys out of one JSON object and rejects the ones nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw FormatError("config: " + path_ + " must be an object");
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw FormatError("config: unknown key " + path_ + "." + key);
    }
  }

  template <typename T>
  void Get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw FormatError("config: " + path_ + "." + key + ": " + e.what());
    }
  }

  bool Has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }
  Section Sub(const std::string& key) {
    seen_.insert(key);
    return Section(j_.at(key), path_ + "." + key);
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string UnitName(UnitKind u) { return u == UnitKind::kSyllable ? "syllable" : "character"; }

UnitKind ParseUnit(const std::string& s) {
  if (s == "syllable") return UnitKind::kSyllable;
  if (s == "character") return UnitKind::kCharacter;
  throw FormatError("config: match_unit must be \"syllable\" or \"character\", got \"" + s + "\"");
}

void ReadSizes(Section s, CorpusSizes& z) {
  s.Get(kSourceTrain, z.source_train);
  s.Get(kSourceDev, z.source_dev);
  s.Get(kSourceTest, z.source_test);
  s.Get(kTargetText, z.target_text);
  s.Get(kTargetDev, z.target_dev);
  s.Get(kTargetTest, z.target_test);
}

void ReadData(Section s, RunConfig& c) {
  CorpusConfig& d = c.data;
  s.Get("num_chars", d.num_chars);
  s.Get("num_syllables", d.num_syllables);
  s.Get("successors", d.successors);
  s.Get("min_length", d.min_length);
  s.Get("max_length", d.max_length);
  s.Get("feat_dim", d.feat_dim);
  s.Get("min_duration", d.min_duration);
  s.Get("max_duration", d.max_duration);
  s.Get("noise_std", d.noise_std);
  s.Get("seed", d.seed);
  if (s.Has("sizes")) ReadSizes(s.Sub("sizes"), d.sizes);
}

void ReadEncoder(Section s, EncoderConfig& e) {
  s.Get("num_blocks", e.num_blocks);
  s.Get("d_model", e.d_model);
  s.Get("num_heads", e.num_heads);
  s.Get("d_ffn", e.d_ffn);
  s.Get("conv_kernel", e.conv_kernel);
  s.Get("dropout", e.dropout);
}

void ReadSyllableEncoder(Section s, SyllableEncoderConfig& e) {
  s.Get("num_blocks", e.num_blocks);
  s.Get("num_heads", e.num_heads);
  s.Get("d_ffn", e.d_ffn);
  s.Get("dropout", e.dropout);
}

void ReadDecoder(Section s, DecoderConfig& e) {
  s.Get("num_blocks", e.num_blocks);
  s.Get("num_heads", e.num_heads);
  s.Get("d_ffn", e.d_ffn);
  s.Get("dropout", e.dropout);
  s.Get("label_smoothing", e.label_smoothing);
}

void ReadModel(Section s, ModelConfig& m) {
  if (s.Has("encoder")) ReadEncoder(s.Sub("encoder"), m.encoder);
  if (s.Has("syllable_encoder")) ReadSyllableEncoder(s.Sub("syllable_encoder"), m.syllable_encoder);
  if (s.Has("decoder")) ReadDecoder(s.Sub("decoder"), m.decoder);
  std::string unit = UnitName(m.match_unit);
  s.Get("match_unit", unit);
  m.match_unit = ParseUnit(unit);
  s.Get("cif_threshold", m.cif_threshold);
  s.Get("mae_stop_text_grad", m.mae_stop_text_grad);
}

void ReadWeights(Section s, LossWeights& w) {
  s.Get("ctc", w.ctc);
  s.Get("qua", w.qua);
  s.Get("ce", w.ce);
  s.Get("aed", w.aed);
  s.Get("mae", w.mae);
}

void ReadAugment(Section s, SpecAugmentConfig& a) {
  s.Get("num_time_masks", a.num_time_masks);
  s.Get("min_time_width", a.min_time_width);
  s.Get("max_time_width", a.max_time_width);
  s.Get("num_freq_masks", a.num_freq_masks);
  s.Get("min_freq_width", a.min_freq_width);
  s.Get("max_freq_width", a.max_freq_width);
}

void ReadTrain(Section s, TrainConfig& t, bool adapt) {
  if (s.Has("weights")) ReadWeights(s.Sub("weights"), t.weights);
  s.Get("base_lr", t.adam.base_lr);
  s.Get("warmup_steps", t.adam.warmup_steps);
  s.Get("beta1", t.adam.beta1);
  s.Get("beta2", t.adam.beta2);
  s.Get("epsilon", t.adam.epsilon);
  s.Get("clip_norm", t.clip_norm);
  s.Get("accum_steps", t.accum_steps);
  s.Get("epochs", t.epochs);
  s.Get("batch_size", t.batch_size);
  s.Get("seed", t.seed);
  s.Get("keep_best", t.keep_best);
  if (adapt) s.Get("paired_ratio", t.paired_ratio);
  if (s.Has("augment")) ReadAugment(s.Sub("augment"), t.augment);
}

void ReadDecode(Section s, DecodeConfig& d) {
  s.Get("beam", d.beam);
  s.Get("nbest", d.nbest);
  s.Get("ctc_weight", d.ctc_weight);
  s.Get("length_bonus", d.length_bonus);
  s.Get("ctc_only", d.ctc_only);
}

json TrainJson(const TrainConfig& t, bool adapt) {
  json j{{"weights",
          {{"ctc", t.weights.ctc},
           {"qua", t.weights.qua},
           {"ce", t.weights.ce},
           {"aed", t.weights.aed},
           {"mae", t.weights.mae}}},
         {"base_lr", t.adam.base_lr},
         {"warmup_steps", t.adam.warmup_steps},
         {"beta1", t.adam.beta1},
         {"beta2", t.adam.beta2},
         {"epsilon", t.adam.epsilon},
         {"clip_norm", t.clip_norm},
         {"accum_steps", t.accum_steps},
         {"epochs", t.epochs},
         {"batch_size", t.batch_size},
         {"seed", t.seed},
         {"keep_best", t.keep_best},
         {"augment",
          {{"num_time_masks", t.augment.num_time_masks},
           {"min_time_width", t.augment.min_time_width},
           {"max_time_width", t.augment.max_time_width},
           {"num_freq_masks", t.augment.num_freq_masks},
           {"min_freq_width", t.augment.min_freq_width},
           {"max_freq_width", t.augment.max_freq_width}}}};
  if (adapt) j["paired_ratio"] = t.paired_ratio;
  return j;
}

// Widths shared by every module follow the encoder.
void SyncWidths(RunConfig& c) {
  const int d = c.model.encoder.d_model;
  c.model.syllable_encoder.d_model = d;
  c.model.decoder.d_model = d;
  c.model.encoder.feat_dim = c.data.feat_dim;
  c.train.adam.d_model = d;
  c.adapt.adam.d_model = d;
}

}  // namespace

void RunConfig::Validate() const {
  data.Validate();
  train.Validate();
  adapt.Validate();
  decode.Validate();
  model.encoder.Validate();
  if (unit_seeds.empty()) throw ContractError("config: experiment.unit_seeds is empty");
}

RunConfig PaperDefaults() {
  RunConfig c;
  c.scale = Scale::kPaper;
  c.data.feat_dim = 80;
  c.model.encoder = EncoderConfig{.feat_dim = 80, .num_blocks = 12, .d_model = 256,
                                  .num_heads = 4, .d_ffn = 2048, .conv_kernel = 15,
                                  .dropout = 0.1};
  c.model.syllable_encoder = SyllableEncoderConfig{.num_blocks = 4, .d_model = 256,
                                                   .num_heads = 4, .d_ffn = 2048, .dropout = 0.1};
  c.model.decoder = DecoderConfig{.num_blocks = 6, .d_model = 256, .num_heads = 4, .d_ffn = 2048,
                                  .dropout = 0.1, .label_smoothing = 0.1};
  c.train.stage = Stage::kPaired;
  c.train.adam.base_lr = 0.002;
  c.train.adam.warmup_steps = 25000;
  c.train.clip_norm = 5.0;
  c.train.accum_steps = 4;
  c.train.epochs = 240;
  c.train.batch_size = 12;
  c.train.keep_best = 30;
  // Mask counts and widths of the common toolkit recipe.
  c.train.augment = SpecAugmentConfig{.num_time_masks = 2, .min_time_width = 1,
                                      .max_time_width = 50, .num_freq_masks = 2,
                                      .min_freq_width = 1, .max_freq_width = 10};
  c.adapt = c.train;
  c.adapt.stage = Stage::kTextOnly;
  c.adapt.epochs = 40;
  c.adapt.paired_ratio = 0.3;
  c.decode = DecodeConfig{};
  SyncWidths(c);
  return c;
}

RunConfig DeskDefaults() {
  RunConfig c = PaperDefaults();
  c.scale = Scale::kDesk;
  c.data.feat_dim = 16;
  const ModelConfig desk = ModelConfig::Desk(0, 0);
  c.model.encoder = desk.encoder;
  c.model.syllable_encoder = desk.syllable_encoder;
  c.model.decoder = desk.decoder;
  // With the d_model^-0.5 factor this peaks at 1e-3 after 400 updates.
  c.train.adam.base_lr = 0.16;
  c.train.adam.warmup_steps = 400;
  c.train.epochs = 30;
  c.train.keep_best = 5;
  c.train.augment = SpecAugmentConfig{};
  c.adapt.augment = SpecAugmentConfig{};
  c.adapt.adam.base_lr = 0.16;
  c.adapt.adam.warmup_steps = 400;
  c.adapt.epochs = 40;
  c.adapt.keep_best = 5;
  SyncWidths(c);
  return c;
}

RunConfig DefaultConfig(Scale scale) {
  return scale == Scale::kPaper ? PaperDefaults() : DeskDefaults();
}

RunConfig ParseConfig(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("config: top level must be an object");
  std::string scale = "desk";
  if (j.contains("scale")) {
    if (!j["scale"].is_string()) throw FormatError("config: scale must be a string");
    scale = j["scale"];
  }
  if (scale != "desk" && scale != "paper") {
    throw FormatError("config: scale must be \"desk\" or \"paper\", got \"" + scale + "\"");
  }
  RunConfig c = DefaultConfig(scale == "paper" ? Scale::kPaper : Scale::kDesk);
  {
    Section top(j, "config");
    top.Get("scale", scale);
    if (top.Has("data")) ReadData(top.Sub("data"), c);
    if (top.Has("model")) ReadModel(top.Sub("model"), c.model);
    if (top.Has("train")) ReadTrain(top.Sub("train"), c.train, false);
    if (top.Has("adapt")) ReadTrain(top.Sub("adapt"), c.adapt, true);
    if (top.Has("decode")) ReadDecode(top.Sub("decode"), c.decode);
    if (top.Has("paths")) {
      Section p = top.Sub("paths");
      std::string corpus = c.corpus_dir.string(), work = c.work_dir.string();
      p.Get("corpus", corpus);
      p.Get("work", work);
      c.corpus_dir = corpus;
      c.work_dir = work;
    }
    if (top.Has("experiment")) top.Sub("experiment").Get("unit_seeds", c.unit_seeds);
  }
  c.train.stage = Stage::kPaired;
  c.adapt.stage = Stage::kTextOnly;
  SyncWidths(c);
  if (c.corpus_dir.is_relative()) c.corpus_dir = base_dir / c.corpus_dir;
  if (c.work_dir.is_relative()) c.work_dir = base_dir / c.work_dir;
  c.Validate();
  return c;
}

RunConfig LoadConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("config: cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseConfig(ss.str(), std::filesystem::absolute(path).parent_path());
}

std::string ConfigJson(const RunConfig& c) {
  json sizes{{kSourceTrain, c.data.sizes.source_train}, {kSourceDev, c.data.sizes.source_dev},
             {kSourceTest, c.data.sizes.source_test},   {kTargetText, c.data.sizes.target_text},
             {kTargetDev, c.data.sizes.target_dev},     {kTargetTest, c.data.sizes.target_test}};
  const ModelConfig& m = c.model;
  json j{
      {"scale", c.scale == Scale::kPaper ? "paper" : "desk"},
      {"data",
       {{"num_chars", c.data.num_chars},
        {"num_syllables", c.data.num_syllables},
        {"successors", c.data.successors},
        {"min_length", c.data.min_length},
        {"max_length", c.data.max_length},
        {"feat_dim", c.data.feat_dim},
        {"min_duration", c.data.min_duration},
        {"max_duration", c.data.max_duration},
        {"noise_std", c.data.noise_std},
        {"seed", c.data.seed},
        {"sizes", sizes}}},
      {"model",
       {{"encoder",
         {{"num_blocks", m.encoder.num_blocks},
          {"d_model", m.encoder.d_model},
          {"num_heads", m.encoder.num_heads},
          {"d_ffn", m.encoder.d_ffn},
          {"conv_kernel", m.encoder.conv_kernel},
          {"dropout", m.encoder.dropout}}},
        {"syllable_encoder",
         {{"num_blocks", m.syllable_encoder.num_blocks},
          {"num_heads", m.syllable_encoder.num_heads},
          {"d_ffn", m.syllable_encoder.d_ffn},
          {"dropout", m.syllable_encoder.dropout}}},
        {"decoder",
         {{"num_blocks", m.decoder.num_blocks},
          {"num_heads", m.decoder.num_heads},
          {"d_ffn", m.decoder.d_ffn},
          {"dropout", m.decoder.dropout},
          {"label_smoothing", m.decoder.label_smoothing}}},
        {"match_unit", UnitName(m.match_unit)},
        {"cif_threshold", m.cif_threshold},
        {"mae_stop_text_grad", m.mae_stop_text_grad}}},
      {"train", TrainJson(c.train, false)},
      {"adapt", TrainJson(c.adapt, true)},
      {"decode",
       {{"beam", c.decode.beam},
        {"nbest", c.decode.nbest},
        {"ctc_weight", c.decode.ctc_weight},
        {"length_bonus", c.decode.length_bonus},
        {"ctc_only", c.decode.ctc_only}}},
      {"paths", {{"corpus", c.corpus_dir.string()}, {"work", c.work_dir.string()}}},
      {"experiment", {{"unit_seeds", c.unit_seeds}}}};
  return j.dump(2);
}

void BindVocabulary(RunConfig& config, const Lexicon& lex) {
  config.model.char_vocab = lex.char_vocab_size();
  config.model.syllable_vocab = lex.syllable_vocab_size();
}

}  // namespace cifasr
