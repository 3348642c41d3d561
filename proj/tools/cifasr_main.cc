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

// Command-line driver: gen-data, train, adapt, eval, avg-ckpt, experiment.
//
// Exit codes: 0 success, 1 usage, 2 data or contract error, 3 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cifasr/config.h"
#include "cifasr/errors.h"
#include "cifasr/pipeline.h"

namespace fs = std::filesystem;
using namespace cifasr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool force = false;
  std::string out;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

void AddCommon(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
  auto* opt = cmd->add_option("--config", f.config, "JSON run configuration");
  if (config_required) opt->required();
  cmd->add_option("--seed", f.seed, "Override the seed of this command");
  cmd->add_flag("--force", f.force, "Overwrite existing output");
  cmd->add_option("--out", f.out, "Output directory");
}

RunConfig Load(const CommonFlags& f) {
  if (!fs::exists(f.config)) throw UsageError("config file not found: " + f.config);
  return LoadConfig(f.config);
}

// Refuses a non-empty directory unless --force.
void PrepareOut(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw ContractError(dir.string() + " exists and is not a directory");
  }
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw ContractError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
}

void Log(const std::string& line) {
  std::cerr << line << std::endl;
}

Corpus LoadBoundCorpus(RunConfig& config) {
  if (!fs::exists(config.corpus_dir / "spec.json")) {
    throw ContractError("no corpus at " + config.corpus_dir.string() + " (run gen-data first)");
  }
  Corpus corpus = LoadCorpus(config.corpus_dir);
  BindVocabulary(config, corpus.lexicon);
  return corpus;
}

int GenData(const CommonFlags& f) {
  RunConfig config = Load(f);
  if (f.seed) config.data.seed = *f.seed;
  const fs::path out = f.out.empty() ? config.corpus_dir : fs::path(f.out);
  PrepareOut(out, f.force);
  const Corpus corpus = GenerateCorpus(config.data);
  WriteCorpus(out, corpus);
  std::size_t total = 0;
  for (const auto& [name, utts] : corpus.sets) total += utts.size();
  std::printf("wrote %zu utterances to %s\n", total, out.string().c_str());
  return kExitOk;
}

int Train(const CommonFlags& f) {
  RunConfig config = Load(f);
  if (f.seed) config.train.seed = *f.seed;
  const Corpus corpus = LoadBoundCorpus(config);
  const fs::path out = f.out.empty() ? config.work_dir / "train" : fs::path(f.out);
  PrepareOut(out, f.force);
  WriteText(out / "config.json", ConfigJson(config));
  const StageResult r = RunPairedStage(config, corpus, out, Log);
  std::printf("averaged %zu checkpoints into %s\n", r.best.size(), r.averaged.string().c_str());
  return kExitOk;
}

int Adapt(const CommonFlags& f, const std::string& init) {
  RunConfig config = Load(f);
  if (f.seed) config.adapt.seed = *f.seed;
  const Corpus corpus = LoadBoundCorpus(config);
  const fs::path init_path = init.empty() ? config.work_dir / "train" / "averaged.ckpt" : fs::path(init);
  const ModelParams params = LoadCheckpoint(init_path);
  const fs::path out = f.out.empty() ? config.work_dir / "adapt" : fs::path(f.out);
  PrepareOut(out, f.force);
  WriteText(out / "config.json", ConfigJson(config));
  const StageResult r = RunTextOnlyStage(config, corpus, params, out, Log);
  std::printf("averaged %zu checkpoints into %s\n", r.best.size(), r.averaged.string().c_str());
  return kExitOk;
}

int Eval(const CommonFlags& f, const std::string& ckpt, const std::string& set,
         const std::string& domain) {
  RunConfig config = Load(f);
  const Corpus corpus = LoadBoundCorpus(config);
  std::string name = set;
  if (!domain.empty()) {
    if (domain != "source" && domain != "target") throw UsageError("--domain must be source or target");
    name = domain == "source" ? kSourceTest : kTargetTest;
  }
  const auto& utts = corpus.Set(name);
  if (utts.empty() || !utts.front().has_features()) {
    throw ContractError("set " + name + " has no audio to decode");
  }
  const fs::path ckpt_path = ckpt.empty() ? config.work_dir / "adapt" / "averaged.ckpt" : fs::path(ckpt);
  ModelParams params = LoadCheckpoint(ckpt_path);
  const fs::path out = f.out.empty() ? config.work_dir / ("eval_" + name) : fs::path(f.out);
  PrepareOut(out, f.force);
  const EvalResult result = evaluate(utts, config.model, params, config.decode);
  WriteResults(out / "results.tsv", result, corpus.lexicon);
  WriteText(out / "summary.json", SummaryJson(result));
  std::printf("%s CER %.2f%% (%d errors / %d chars)\n", name.c_str(), 100.0 * result.cer(),
              result.corpus.errors(), result.corpus.ref_length);
  return kExitOk;
}

int AvgCkpt(const CommonFlags& f, const std::vector<std::string>& inputs, const std::string& metrics,
            int k) {
  std::vector<fs::path> paths;
  if (!metrics.empty()) {
    if (!inputs.empty()) throw UsageError("give either checkpoints or --metrics, not both");
    const auto log = ReadMetricLog(metrics);
    for (const EpochRecord& r : select_best(log, k)) paths.emplace_back(r.checkpoint);
  } else {
    paths.assign(inputs.begin(), inputs.end());
  }
  if (paths.empty()) throw UsageError("avg-ckpt needs checkpoints or --metrics");
  const fs::path out_dir = f.out.empty() ? fs::path(".") : fs::path(f.out);
  fs::create_directories(out_dir);
  const fs::path out = out_dir / "averaged.ckpt";
  if (fs::exists(out) && !f.force) {
    throw ContractError(out.string() + " exists (use --force to overwrite)");
  }
  const ModelParams avg = average_checkpoints(paths);
  SaveCheckpoint(avg, out);
  std::printf("averaged %zu checkpoints into %s\n", paths.size(), out.string().c_str());
  return kExitOk;
}

int Experiment(const CommonFlags& f, bool skip_units, bool skip_ablation) {
  RunConfig config = Load(f);
  if (f.seed) {
    config.train.seed = *f.seed;
    config.adapt.seed = *f.seed;
  }
  const fs::path out = f.out.empty() ? config.work_dir / "experiment" : fs::path(f.out);
  PrepareOut(out, f.force);
  WriteText(out / "config.json", ConfigJson(config));
  ExperimentOptions options;
  options.run_unit_comparison = !skip_units;
  options.run_no_paired_ablation = !skip_ablation;
  const ExperimentReport report = RunExperiment(config, out, options, Log);
  WriteText(out / "report.md", ReportMarkdown(report, config));
  WriteText(out / "report.json", ReportJson(report));
  std::printf("%s", ReportMarkdown(report, config).c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CIF-based speech/text modality matching at desk scale"};
  app.require_subcommand(1);

  CommonFlags gen_flags, train_flags, adapt_flags, eval_flags, avg_flags, exp_flags;
  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic two-domain corpus");
  AddCommon(gen, gen_flags);

  auto* train = app.add_subcommand("train", "Stage 1: paired training");
  AddCommon(train, train_flags);

  std::string adapt_init;
  auto* adapt = app.add_subcommand("adapt", "Stage 2: text-only adaptation of the decoder");
  AddCommon(adapt, adapt_flags);
  adapt->add_option("--init", adapt_init, "Starting checkpoint (default <work>/train/averaged.ckpt)");

  std::string eval_ckpt, eval_set = kTargetTest, eval_domain;
  auto* eval = app.add_subcommand("eval", "Decode a paired set and score CER");
  AddCommon(eval, eval_flags);
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint (default <work>/adapt/averaged.ckpt)");
  eval->add_option("--set", eval_set, "Corpus set name");
  eval->add_option("--domain", eval_domain, "source or target test set");

  std::vector<std::string> avg_inputs;
  std::string avg_metrics;
  int avg_k = 5;
  auto* avg = app.add_subcommand("avg-ckpt", "Average checkpoints");
  AddCommon(avg, avg_flags, false);
  avg->add_option("checkpoints", avg_inputs, "Checkpoints to average");
  avg->add_option("--metrics", avg_metrics, "metrics.jsonl to pick the best checkpoints from");
  avg->add_option("--k", avg_k, "Number of best checkpoints with --metrics")->check(CLI::PositiveNumber);

  bool skip_units = false, skip_ablation = false;
  auto* exp = app.add_subcommand("experiment", "Run the full desk-scale experiment");
  AddCommon(exp, exp_flags);
  exp->add_flag("--skip-units", skip_units, "Skip the character vs syllable comparison");
  exp->add_flag("--skip-ablation", skip_ablation, "Skip the run without source batches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen) return GenData(gen_flags);
    if (*train) return Train(train_flags);
    if (*adapt) return Adapt(adapt_flags, adapt_init);
    if (*eval) return Eval(eval_flags, eval_ckpt, eval_set, eval_domain);
    if (*avg) return AvgCkpt(avg_flags, avg_inputs, avg_metrics, avg_k);
    if (*exp) return Experiment(exp_flags, skip_units, skip_ablation);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
