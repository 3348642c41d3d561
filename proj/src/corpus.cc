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

#include "cifasr/corpus.h"

#include <fstream>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

using json = nlohmann::json;

std::uint64_t DeriveSeed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finaliser
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum SeedStream : std::uint64_t {
  kLexiconStream = 1,
  kAcousticStream,
  kSourceDomainStream,
  kTargetDomainStream,
  kSetStreamBase = 100,
};

struct SetSpec {
  const char* name;
  bool target;
  bool audio;
  int CorpusSizes::*size;
};

constexpr SetSpec kSets[] = {
    {kSourceTrain, false, true, &CorpusSizes::source_train},
    {kSourceDev, false, true, &CorpusSizes::source_dev},
    {kSourceTest, false, true, &CorpusSizes::source_test},
    {kTargetText, true, false, &CorpusSizes::target_text},
    {kTargetDev, true, false, &CorpusSizes::target_dev},
    {kTargetTest, true, true, &CorpusSizes::target_test},
};

json ConfigJson(const CorpusConfig& c) {
  json sizes;
  for (const SetSpec& s : kSets) sizes[s.name] = c.sizes.*(s.size);
  return json{{"num_chars", c.num_chars},       {"num_syllables", c.num_syllables},
              {"successors", c.successors},     {"min_length", c.min_length},
              {"max_length", c.max_length},     {"feat_dim", c.feat_dim},
              {"min_duration", c.min_duration}, {"max_duration", c.max_duration},
              {"noise_std", c.noise_std},       {"seed", c.seed},
              {"sizes", sizes}};
}

CorpusConfig ParseConfig(const json& j) {
  CorpusConfig c;
  c.num_chars = j.at("num_chars");
  c.num_syllables = j.at("num_syllables");
  c.successors = j.at("successors");
  c.min_length = j.at("min_length");
  c.max_length = j.at("max_length");
  c.feat_dim = j.at("feat_dim");
  c.min_duration = j.at("min_duration");
  c.max_duration = j.at("max_duration");
  c.noise_std = j.at("noise_std");
  c.seed = j.at("seed");
  for (const SetSpec& s : kSets) c.sizes.*(s.size) = j.at("sizes").at(s.name);
  return c;
}

json DomainJson(const DomainSpec& d) {
  return json{{"seed", d.seed},
              {"min_length", d.min_length},
              {"max_length", d.max_length},
              {"transitions", d.transitions}};
}

DomainSpec ParseDomain(const json& j) {
  DomainSpec d;
  d.seed = j.at("seed");
  d.min_length = j.at("min_length");
  d.max_length = j.at("max_length");
  d.transitions = j.at("transitions").get<std::vector<std::vector<double>>>();
  return d;
}

}  // namespace

void CorpusConfig::Validate() const {
  if (num_syllables < 1 || num_chars < num_syllables) {
    throw ContractError("corpus config: need 1 ≤ num_syllables ≤ num_chars");
  }
  if (successors < 1 || min_length < 1 || max_length < min_length) {
    throw ContractError("corpus config: bad successor count or length range");
  }
  if (feat_dim < 1 || min_duration < 1 || max_duration < min_duration || noise_std < 0) {
    throw ContractError("corpus config: bad acoustic settings");
  }
  for (const SetSpec& s : kSets) {
    if (sizes.*(s.size) < 1) throw ContractError(std::string("corpus config: empty set ") + s.name);
  }
}

const std::vector<Utterance>& Corpus::Set(const std::string& name) const {
  auto it = sets.find(name);
  if (it == sets.end()) throw ContractError("corpus has no set " + name);
  return it->second;
}

Corpus GenerateCorpus(const CorpusConfig& config) {
  config.Validate();
  Corpus c;
  c.config = config;
  c.lexicon = MakeSyntheticLexicon(config.num_chars, config.num_syllables,
                                   DeriveSeed(config.seed, kLexiconStream));
  c.acoustic = MakeAcousticModel(config.num_syllables, config.feat_dim, config.min_duration,
                                 config.max_duration, config.noise_std,
                                 DeriveSeed(config.seed, kAcousticStream));
  c.source = MakeSparseDomain(c.lexicon, config.successors, config.min_length, config.max_length,
                              DeriveSeed(config.seed, kSourceDomainStream));
  c.target = MakeSparseDomain(c.lexicon, config.successors, config.min_length, config.max_length,
                              DeriveSeed(config.seed, kTargetDomainStream));
  std::uint64_t stream = kSetStreamBase;
  for (const SetSpec& s : kSets) {
    const std::uint64_t set_seed = DeriveSeed(config.seed, stream++);
    DomainSpec domain = s.target ? c.target : c.source;
    domain.seed = set_seed;
    const int n = config.sizes.*(s.size);
    std::vector<TokenSeq> texts = gen_corpus(domain, n, c.lexicon);
    std::vector<Utterance>& utts = c.sets[s.name];
    utts.reserve(n);
    for (int i = 0; i < n; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s-%05d", s.name, i);
      Utterance u;
      u.id = id;
      u.chars = texts[i];
      u.syllables = chars_to_syllables(u.chars, c.lexicon);
      if (s.audio) {
        u.features =
            synth_features(u.syllables, c.acoustic, DeriveSeed(set_seed, static_cast<std::uint64_t>(i)))
                .features;
      }
      utts.push_back(std::move(u));
    }
  }
  return c;
}

void WriteCorpus(const std::filesystem::path& dir, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  corpus.lexicon.Save(dir / "lexicon.tsv");
  json spec{{"config", ConfigJson(corpus.config)},
            {"source_domain", DomainJson(corpus.source)},
            {"target_domain", DomainJson(corpus.target)},
            {"acoustic",
             {{"seed", corpus.acoustic.seed},
              {"min_duration", corpus.acoustic.min_duration},
              {"max_duration", corpus.acoustic.max_duration},
              {"noise_std", corpus.acoustic.noise_std},
              {"prototypes", corpus.acoustic.prototypes}}}};
  std::ofstream out(dir / "spec.json", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + (dir / "spec.json").string());
  out << spec.dump(1) << '\n';
  for (const SetSpec& s : kSets) WriteUtteranceSet(dir / s.name, corpus.Set(s.name), corpus.lexicon);
}

Corpus LoadCorpus(const std::filesystem::path& dir) {
  Corpus c;
  std::ifstream in(dir / "spec.json");
  if (!in) throw FormatError("corpus: missing " + (dir / "spec.json").string());
  try {
    const json spec = json::parse(in);
    c.config = ParseConfig(spec.at("config"));
    c.source = ParseDomain(spec.at("source_domain"));
    c.target = ParseDomain(spec.at("target_domain"));
    const json& a = spec.at("acoustic");
    c.acoustic.seed = a.at("seed");
    c.acoustic.min_duration = a.at("min_duration");
    c.acoustic.max_duration = a.at("max_duration");
    c.acoustic.noise_std = a.at("noise_std");
    c.acoustic.prototypes = a.at("prototypes").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("corpus spec.json: ") + e.what());
  }
  c.lexicon = Lexicon::Load(dir / "lexicon.tsv");
  for (const SetSpec& s : kSets) c.sets[s.name] = ReadUtteranceSet(dir / s.name, c.lexicon);
  return c;
}

}  // namespace cifasr
