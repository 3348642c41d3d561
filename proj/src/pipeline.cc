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

#include "cifasr/pipeline.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

void Say(const Logger& log, const std::string& line) {
  if (log) log(line);
}

std::string Fmt(const char* format, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, a, b, c);
  return buf;
}

std::string Percent(double x) { return Fmt("%.2f", 100.0 * x); }

json DomainJson(const DomainCer& d) { return json{{"source", d.source}, {"target", d.target}}; }

DomainCer ParseDomain(const json& j) { return DomainCer{j.at("source"), j.at("target")}; }

struct PipelineRun {
  DomainCer baseline;
  DomainCer adapted;
  ModelParams stage1;
};

RunConfig WithSeed(RunConfig config, std::uint64_t seed, UnitKind unit) {
  config.train.seed = seed;
  config.adapt.seed = seed;
  config.model.match_unit = unit;
  return config;
}

std::string RunName(UnitKind unit, std::uint64_t seed) {
  return std::string(unit == UnitKind::kSyllable ? "syllable" : "character") + "_seed" +
         std::to_string(seed);
}

}  // namespace

ModelParams AverageBest(std::span<const EpochRecord> log, int k, const std::filesystem::path& out) {
  const int keep = std::min<int>(k, static_cast<int>(log.size()));
  std::vector<std::filesystem::path> paths;
  for (const EpochRecord& r : select_best(log, keep)) paths.emplace_back(r.checkpoint);
  ModelParams avg = average_checkpoints(paths);
  SaveCheckpoint(avg, out);
  return avg;
}

StageResult RunPairedStage(const RunConfig& config, const Corpus& corpus,
                           const std::filesystem::path& out_dir, const Logger& log) {
  StageResult result;
  ModelParams params = InitModel(config.model, config.train.seed);
  TrainArtifacts artifacts;
  artifacts.out_dir = out_dir;
  artifacts.on_epoch = [&](const EpochRecord& r) {
    Say(log, "  stage1 epoch " + std::to_string(r.epoch) +
                 Fmt(" train %.4f dev %.4f (%.1fs)", r.train.total, r.dev_loss, r.seconds));
  };
  result.log = train_paired(config.model, config.train, corpus.Set(kSourceTrain),
                            corpus.Set(kSourceDev), params, artifacts);
  if (result.log.empty()) {
    result.averaged = out_dir / "averaged.ckpt";
    std::filesystem::create_directories(out_dir);
    SaveCheckpoint(params, result.averaged);
    result.params = std::move(params);
    return result;
  }
  result.best = select_best(result.log, std::min<int>(config.train.keep_best, result.log.size()));
  result.averaged = out_dir / "averaged.ckpt";
  result.params = AverageBest(result.log, config.train.keep_best, result.averaged);
  return result;
}

StageResult RunTextOnlyStage(const RunConfig& config, const Corpus& corpus, const ModelParams& init,
                             const std::filesystem::path& out_dir, const Logger& log,
                             const std::function<void(const EpochRecord&, ModelParams&)>& on_epoch) {
  StageResult result;
  ModelParams params = init;
  freeze_for_text_only(params);
  TrainArtifacts artifacts;
  artifacts.out_dir = out_dir;
  artifacts.on_epoch = [&](const EpochRecord& r) {
    Say(log, "  stage2 epoch " + std::to_string(r.epoch) +
                 Fmt(" text %.4f dev %.4f (%.1fs)", r.train_text, r.dev_loss, r.seconds));
    if (on_epoch) on_epoch(r, params);
  };
  result.log = adapt_text_only(config.model, config.adapt, corpus.Set(kTargetText),
                               corpus.Set(kTargetDev), corpus.Set(kSourceTrain), params, artifacts);
  result.averaged = out_dir / "averaged.ckpt";
  if (result.log.empty()) {
    std::filesystem::create_directories(out_dir);
    SaveCheckpoint(params, result.averaged);
    result.params = std::move(params);
    return result;
  }
  result.best = select_best(result.log, std::min<int>(config.adapt.keep_best, result.log.size()));
  result.params = AverageBest(result.log, config.adapt.keep_best, result.averaged);
  return result;
}

DomainCer EvaluateDomains(const RunConfig& config, const Corpus& corpus, ModelParams& params) {
  return DomainCer{evaluate(corpus.Set(kSourceTest), config.model, params, config.decode).cer(),
                   evaluate(corpus.Set(kTargetTest), config.model, params, config.decode).cer()};
}

ExperimentReport RunExperiment(const RunConfig& base, const std::filesystem::path& out_dir,
                               const ExperimentOptions& options, const Logger& log) {
  const auto start = Clock::now();
  ExperimentReport report;
  Say(log, "generating corpus");
  const Corpus corpus = GenerateCorpus(base.data);
  WriteCorpus(out_dir / "corpus", corpus);
  RunConfig config = base;
  BindVocabulary(config, corpus.lexicon);

  auto pipeline = [&](UnitKind unit, std::uint64_t seed, bool main_run) {
    const RunConfig cfg = WithSeed(config, seed, unit);
    const auto dir = out_dir / "runs" / RunName(unit, seed);
    Say(log, "run " + RunName(unit, seed) + ": stage 1");
    StageResult s1 = RunPairedStage(cfg, corpus, dir / "stage1", log);
    PipelineRun run;
    run.baseline = EvaluateDomains(cfg, corpus, s1.params);
    Say(log, "  baseline CER source " + Percent(run.baseline.source) + "% target " +
                 Percent(run.baseline.target) + "%");
    std::function<void(const EpochRecord&, ModelParams&)> track;
    if (main_run) {
      track = [&](const EpochRecord& r, ModelParams& p) {
        const DomainCer d = EvaluateDomains(cfg, corpus, p);
        report.series.push_back(EpochCer{r.epoch, d.source, d.target, r.dev_loss});
        Say(log, "    epoch " + std::to_string(r.epoch) + " CER source " + Percent(d.source) +
                     "% target " + Percent(d.target) + "%");
      };
    }
    Say(log, "run " + RunName(unit, seed) + ": stage 2");
    StageResult s2 = RunTextOnlyStage(cfg, corpus, s1.params, dir / "stage2", log, track);
    run.adapted = EvaluateDomains(cfg, corpus, s2.params);
    Say(log, "  adapted CER source " + Percent(run.adapted.source) + "% target " +
                 Percent(run.adapted.target) + "%");
    if (main_run) {
      report.frozen_bit_identical = Fingerprint(s1.params, "decoder.", true) ==
                                    Fingerprint(s2.params, "decoder.", true);
      for (const EpochRecord& r : s2.log) {
        if (Fingerprint(LoadCheckpoint(r.checkpoint), "decoder.", true) !=
            Fingerprint(s1.params, "decoder.", true)) {
          report.frozen_bit_identical = false;
        }
      }
    }
    run.stage1 = std::move(s1.params);
    return run;
  };

  const std::uint64_t main_seed = config.train.seed;
  PipelineRun main = pipeline(UnitKind::kSyllable, main_seed, true);
  report.baseline = main.baseline;
  report.adapted = main.adapted;
  report.main_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  if (options.run_no_paired_ablation) {
    RunConfig cfg = WithSeed(config, main_seed, UnitKind::kSyllable);
    cfg.adapt.paired_ratio = 0.0;
    Say(log, "ablation without source paired batches");
    StageResult s2 = RunTextOnlyStage(
        cfg, corpus, main.stage1, out_dir / "runs" / (RunName(UnitKind::kSyllable, main_seed) + "_rho0"),
        log);
    report.adapted_no_paired = EvaluateDomains(cfg, corpus, s2.params);
    report.has_no_paired = true;
    Say(log, "  adapted (no paired) CER source " + Percent(report.adapted_no_paired.source) +
                 "% target " + Percent(report.adapted_no_paired.target) + "%");
  }

  if (options.run_unit_comparison) {
    for (std::uint64_t seed : config.unit_seeds) {
      UnitComparison cmp;
      cmp.seed = seed;
      if (seed == main_seed) {
        cmp.syllable_baseline = main.baseline;
        cmp.syllable_adapted = main.adapted;
      } else {
        const PipelineRun r = pipeline(UnitKind::kSyllable, seed, false);
        cmp.syllable_baseline = r.baseline;
        cmp.syllable_adapted = r.adapted;
      }
      const PipelineRun c = pipeline(UnitKind::kCharacter, seed, false);
      cmp.character_baseline = c.baseline;
      cmp.character_adapted = c.adapted;
      report.units.push_back(cmp);
    }
  }
  report.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return report;
}

std::string ReportMarkdown(const ExperimentReport& r, const RunConfig& config) {
  std::ostringstream md;
  md << "# Desk-scale text-only adaptation experiment\n\n";
  md << "Corpus seed " << config.data.seed << ", training seed " << config.train.seed
     << ", paired ratio " << config.adapt.paired_ratio << ". CER in percent.\n\n";
  md << "## Baseline vs adapted\n\n";
  md << "| model | source test | target test |\n|---|---|---|\n";
  md << "| stage 1 (paired only) | " << Percent(r.baseline.source) << " | "
     << Percent(r.baseline.target) << " |\n";
  md << "| + text-only adaptation | " << Percent(r.adapted.source) << " | "
     << Percent(r.adapted.target) << " |\n";
  if (r.has_no_paired) {
    md << "| + text-only adaptation, no source batches | " << Percent(r.adapted_no_paired.source)
       << " | " << Percent(r.adapted_no_paired.target) << " |\n";
  }
  md << "\nNon-decoder parameters bit-identical after adaptation: "
     << (r.frozen_bit_identical ? "yes" : "no") << "\n\n";
  md << "## CER by adaptation epoch\n\n";
  md << "| epoch | dev loss | source test | target test |\n|---|---|---|---|\n";
  md << "| 0 | - | " << Percent(r.baseline.source) << " | " << Percent(r.baseline.target)
     << " |\n";
  for (const EpochCer& e : r.series) {
    md << "| " << e.epoch << " | " << Fmt("%.4f", e.dev_loss) << " | " << Percent(e.source)
       << " | " << Percent(e.target) << " |\n";
  }
  md << "\n## Match unit: syllable vs character\n\n";
  md << "| seed | syllable baseline | syllable adapted | character baseline | character adapted "
        "|\n|---|---|---|---|---|\n";
  for (const UnitComparison& u : r.units) {
    md << "| " << u.seed << " | " << Percent(u.syllable_baseline.target) << " | "
       << Percent(u.syllable_adapted.target) << " | " << Percent(u.character_baseline.target)
       << " | " << Percent(u.character_adapted.target) << " |\n";
  }
  md << "\nTarget-domain test CER. Wall time " << Fmt("%.0f", r.seconds) << " s (main run "
     << Fmt("%.0f", r.main_seconds) << " s).\n";
  return md.str();
}

std::string ReportJson(const ExperimentReport& r) {
  json series = json::array();
  for (const EpochCer& e : r.series) {
    series.push_back(
        {{"epoch", e.epoch}, {"source", e.source}, {"target", e.target}, {"dev_loss", e.dev_loss}});
  }
  json units = json::array();
  for (const UnitComparison& u : r.units) {
    units.push_back({{"seed", u.seed},
                     {"syllable_baseline", DomainJson(u.syllable_baseline)},
                     {"syllable_adapted", DomainJson(u.syllable_adapted)},
                     {"character_baseline", DomainJson(u.character_baseline)},
                     {"character_adapted", DomainJson(u.character_adapted)}});
  }
  return json{{"baseline", DomainJson(r.baseline)},
              {"adapted", DomainJson(r.adapted)},
              {"adapted_no_paired", DomainJson(r.adapted_no_paired)},
              {"has_no_paired", r.has_no_paired},
              {"frozen_bit_identical", r.frozen_bit_identical},
              {"series", series},
              {"units", units},
              {"main_seconds", r.main_seconds},
              {"seconds", r.seconds}}
      .dump(2);
}

ExperimentReport ParseReportJson(const std::string& text) {
  try {
    const json j = json::parse(text);
    ExperimentReport r;
    r.baseline = ParseDomain(j.at("baseline"));
    r.adapted = ParseDomain(j.at("adapted"));
    r.adapted_no_paired = ParseDomain(j.at("adapted_no_paired"));
    r.has_no_paired = j.at("has_no_paired");
    r.frozen_bit_identical = j.at("frozen_bit_identical");
    for (const json& e : j.at("series")) {
      r.series.push_back(EpochCer{e.at("epoch"), e.at("source"), e.at("target"), e.at("dev_loss")});
    }
    for (const json& u : j.at("units")) {
      r.units.push_back(UnitComparison{u.at("seed"), ParseDomain(u.at("syllable_baseline")),
                                       ParseDomain(u.at("syllable_adapted")),
                                       ParseDomain(u.at("character_baseline")),
                                       ParseDomain(u.at("character_adapted"))});
    }
    r.main_seconds = j.at("main_seconds");
    r.seconds = j.at("seconds");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("experiment report: ") + e.what());
  }
}

}  // namespace cifasr
