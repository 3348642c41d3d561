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

#include "cifasr/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

// Pool of common CJK characters for the synthetic alphabet.
constexpr std::string_view kCharacters =
    "的一是不了人我在有他这中大来上国个到说们为子和你地出道也时年得就那要下以生会自着去";

const std::vector<std::string>& SyllableNames() {
  static const std::vector<std::string> names = [] {
    const char* initials[] = {"b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h", "j",
                              "q", "x", "zh", "ch", "sh", "r", "z", "c", "s", "y", "w"};
    const char* finals[] = {"a", "e", "i", "u", "ao", "an", "en", "ang", "ong", "ou"};
    std::vector<std::string> out;
    for (const char* f : finals) {
      for (const char* i : initials) out.push_back(std::string(i) + f);
    }
    return out;
  }();
  return names;
}

}  // namespace

void DomainSpec::Validate() const {
  if (transitions.empty()) throw ContractError("domain has no characters");
  if (min_length < 1 || max_length < min_length) throw ContractError("bad sentence length range");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& row = transitions[i];
    if (row.size() != transitions.size()) throw ContractError("transition table is not square");
    double s = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw ContractError("negative transition probability");
      s += p;
    }
    if (std::abs(s - 1.0) > 1e-9) {
      throw ContractError("transition row " + std::to_string(i) + " sums to " +
                          std::to_string(s));
    }
  }
}

double AcousticModelSpec::MinPrototypeDistance() const {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < prototypes.size(); ++i) {
    for (std::size_t j = i + 1; j < prototypes.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < prototypes[i].size(); ++k) {
        const double d = prototypes[i][k] - prototypes[j][k];
        d2 += d * d;
      }
      best = std::min(best, std::sqrt(d2));
    }
  }
  return best;
}

void AcousticModelSpec::Validate() const {
  if (prototypes.empty() || feat_dim() < 1) throw ContractError("acoustic model has no prototypes");
  for (const auto& p : prototypes) {
    if (static_cast<int>(p.size()) != feat_dim()) throw ContractError("ragged prototypes");
  }
  if (min_duration < 1 || max_duration < min_duration) throw ContractError("bad duration range");
  if (noise_std < 0.0) throw ContractError("negative noise std");
}

AcousticModelSpec MakeAcousticModel(int num_syllables, int feat_dim, int min_duration,
                                    int max_duration, double noise_std, std::uint64_t seed) {
  AcousticModelSpec spec;
  spec.min_duration = min_duration;
  spec.max_duration = max_duration;
  spec.noise_std = noise_std;
  spec.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    spec.prototypes.assign(num_syllables, std::vector<double>(feat_dim));
    for (auto& p : spec.prototypes)
      for (double& v : p) v = normal(rng);
    if (num_syllables < 2 || spec.MinPrototypeDistance() > 4.0 * noise_std) {
      spec.Validate();
      return spec;
    }
  }
  throw ContractError("could not place separable prototypes; lower noise_std or raise feat_dim");
}

Lexicon MakeSyntheticLexicon(int num_chars, int num_syllables, std::uint64_t seed) {
  const auto chars = SplitUtf8(kCharacters);
  if (num_chars > static_cast<int>(chars.size()) || num_syllables > num_chars ||
      num_syllables < 1 || num_syllables > static_cast<int>(SyllableNames().size())) {
    throw ContractError("unsupported synthetic lexicon size");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::string> sylls(SyllableNames().begin(), SyllableNames().end());
  std::shuffle(sylls.begin(), sylls.end(), rng);
  sylls.resize(num_syllables);
  std::vector<int> owner(num_chars);
  for (int i = 0; i < num_chars; ++i) {
    owner[i] = i < num_syllables ? i : std::uniform_int_distribution<int>(0, num_syllables - 1)(rng);
  }
  std::shuffle(owner.begin(), owner.end(), rng);
  std::vector<std::pair<std::string, std::string>> entries;
  for (int i = 0; i < num_chars; ++i) entries.emplace_back(chars[i], sylls[owner[i]]);
  return Lexicon::FromEntries(entries);
}

DomainSpec MakeSparseDomain(const Lexicon& lex, int successors, int min_length, int max_length,
                            std::uint64_t seed) {
  const int n = lex.char_vocab_size() - kNumSpecialIds;
  DomainSpec spec;
  spec.min_length = min_length;
  spec.max_length = max_length;
  spec.seed = seed;
  spec.transitions.assign(n, std::vector<double>(n, 0.0));
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> gamma1(1.0);
  for (int i = 0; i < n; ++i) {
    const int syll = lex.SyllableOfChar(i + kNumSpecialIds);
    std::vector<int> candidates;
    for (int j = 0; j < n; ++j) {
      if (lex.SyllableOfChar(j + kNumSpecialIds) != syll) candidates.push_back(j);
    }
    std::shuffle(candidates.begin(), candidates.end(), rng);
    const int k = std::min<int>(successors, static_cast<int>(candidates.size()));
    if (k < 1) throw ContractError("character has no admissible successor");
    double total = 0.0;
    std::vector<double> w(k);
    for (double& x : w) total += (x = gamma1(rng));
    for (int s = 0; s < k; ++s) spec.transitions[i][candidates[s]] = w[s] / total;
  }
  spec.Validate();
  return spec;
}

std::vector<TokenSeq> gen_corpus(const DomainSpec& domain, int n_utts, const Lexicon& lex) {
  if (n_utts < 1) throw ContractError("gen_corpus: n_utts must be ≥ 1");
  domain.Validate();
  const int n = domain.num_chars();
  if (n + kNumSpecialIds > lex.char_vocab_size()) {
    throw ContractError("domain has more characters than the lexicon");
  }
  std::mt19937_64 rng(domain.seed);
  std::uniform_int_distribution<int> length(domain.min_length, domain.max_length);
  std::uniform_int_distribution<int> first(0, n - 1);
  std::vector<std::discrete_distribution<int>> next;
  next.reserve(n);
  for (const auto& row : domain.transitions) next.emplace_back(row.begin(), row.end());
  std::vector<TokenSeq> out(n_utts);
  for (auto& seq : out) {
    seq.unit = UnitKind::kCharacter;
    const int len = length(rng);
    int c = first(rng);
    seq.ids.push_back(c + kNumSpecialIds);
    for (int i = 1; i < len; ++i) {
      c = next[c](rng);
      seq.ids.push_back(c + kNumSpecialIds);
    }
  }
  return out;
}

SynthesizedFeatures synth_features(const TokenSeq& syllables, const AcousticModelSpec& acoustic,
                                   std::uint64_t seed) {
  if (syllables.empty()) throw ContractError("synth_features: empty syllable sequence");
  acoustic.Validate();
  const int num_protos = static_cast<int>(acoustic.prototypes.size());
  const int F = acoustic.feat_dim();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> duration(acoustic.min_duration, acoustic.max_duration);
  std::normal_distribution<double> noise(0.0, 1.0);
  SynthesizedFeatures out;
  int total = 0;
  for (int s : syllables.ids) {
    if (s < kNumSpecialIds || s - kNumSpecialIds >= num_protos) {
      throw ContractError("synth_features: syllable id " + std::to_string(s) +
                          " has no acoustic prototype");
    }
    out.durations.push_back(duration(rng));
    total += out.durations.back();
  }
  out.features = Tensor({total, F});
  int row = 0;
  for (std::size_t k = 0; k < syllables.ids.size(); ++k) {
    const auto& proto = acoustic.prototypes[syllables.ids[k] - kNumSpecialIds];
    for (int r = 0; r < out.durations[k]; ++r, ++row) {
      for (int f = 0; f < F; ++f) {
        out.features.at(row, f) = proto[f] + acoustic.noise_std * noise(rng);
      }
    }
  }
  return out;
}

Tensor spec_augment(const Tensor& features, const SpecAugmentConfig& config, std::uint64_t seed) {
  const int T = features.rows(), F = features.cols();
  if (config.max_time_width > T || config.max_freq_width > F || config.max_time_width < 0 ||
      config.min_time_width < 0 || config.min_freq_width < 0 ||
      config.min_time_width > config.max_time_width ||
      config.min_freq_width > config.max_freq_width) {
    throw ContractError("spec_augment: mask width exceeds feature extent");
  }
  Tensor out = features;
  if (config.num_time_masks == 0 && config.num_freq_masks == 0) return out;
  const Eigen::RowVectorXd mean = features.mat().colwise().mean();
  std::mt19937_64 rng(seed);
  for (int m = 0; m < config.num_time_masks; ++m) {
    const int w = std::uniform_int_distribution<int>(config.min_time_width, config.max_time_width)(rng);
    const int start = std::uniform_int_distribution<int>(0, T - w)(rng);
    for (int t = start; t < start + w; ++t) out.mat().row(t) = mean;
  }
  for (int m = 0; m < config.num_freq_masks; ++m) {
    const int w = std::uniform_int_distribution<int>(config.min_freq_width, config.max_freq_width)(rng);
    const int start = std::uniform_int_distribution<int>(0, F - w)(rng);
    for (int f = start; f < start + w; ++f) out.mat().col(f).setConstant(mean[f]);
  }
  return out;
}

Tensor Batch::Features(int b) const {
  if (features.empty()) throw ContractError("batch has no features");
  const int T = frame_lengths.at(b), Tmax = features.dim(1), F = features.dim(2);
  Tensor out({T, F});
  std::copy_n(features.data() + static_cast<std::size_t>(b) * Tmax * F,
              static_cast<std::size_t>(T) * F, out.data());
  return out;
}

TokenSeq Batch::Chars(int b) const {
  TokenSeq seq{{chars.at(b).begin(), chars.at(b).begin() + token_lengths.at(b)},
               UnitKind::kCharacter};
  return seq;
}

TokenSeq Batch::Syllables(int b) const {
  TokenSeq seq{{syllables.at(b).begin(), syllables.at(b).begin() + token_lengths.at(b)},
               UnitKind::kSyllable};
  return seq;
}

std::vector<Batch> make_batches(std::span<const Utterance> utts, int batch_size, double pad_value) {
  if (utts.empty()) throw ContractError("make_batches: empty dataset");
  if (batch_size < 1) throw ContractError("make_batches: batch_size must be ≥ 1");
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < utts.size(); start += batch_size) {
    const std::size_t end = std::min(utts.size(), start + static_cast<std::size_t>(batch_size));
    Batch b;
    int tmax = 0, lmax = 0, feat_dim = 0;
    const bool paired = utts[start].has_features();
    for (std::size_t i = start; i < end; ++i) {
      const Utterance& u = utts[i];
      if (u.has_features() != paired) throw ContractError("make_batches: mixed paired/text-only");
      if (paired) {
        if (feat_dim && u.features.cols() != feat_dim) throw DimensionError("feature dim mismatch");
        feat_dim = u.features.cols();
        tmax = std::max(tmax, u.num_frames());
      }
      lmax = std::max(lmax, static_cast<int>(u.chars.size()));
    }
    const int B = static_cast<int>(end - start);
    if (paired) b.features = Tensor({B, tmax, feat_dim}, pad_value);
    for (int k = 0; k < B; ++k) {
      const Utterance& u = utts[start + k];
      b.ids.push_back(u.id);
      b.frame_lengths.push_back(u.num_frames());
      b.token_lengths.push_back(static_cast<int>(u.chars.size()));
      std::vector<int> c(lmax, kPadId), s(lmax, kPadId);
      std::copy(u.chars.ids.begin(), u.chars.ids.end(), c.begin());
      std::copy(u.syllables.ids.begin(), u.syllables.ids.end(), s.begin());
      b.chars.push_back(std::move(c));
      b.syllables.push_back(std::move(s));
      if (paired) {
        std::copy(u.features.values().begin(), u.features.values().end(),
                  b.features.data() + static_cast<std::size_t>(k) * tmax * feat_dim);
      }
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::pair<std::string, std::string>> ReadTranscripts(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open transcript file " + path.string());
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected utt_id<TAB>text");
    }
    rows.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return rows;
}

void WriteTranscripts(const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  for (const auto& [id, text] : rows) os << id << '\t' << text << '\n';
}

void WriteUtteranceSet(const std::filesystem::path& dir, std::span<const Utterance> utts,
                       const Lexicon& lex) {
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& u : utts) rows.emplace_back(u.id, decode_ids(u.chars, lex));
  WriteTranscripts(dir / "text.tsv", rows);
  if (utts.empty() || !utts.front().has_features()) return;
  std::ofstream bin(dir / "feats.bin", std::ios::binary | std::ios::trunc);
  std::ofstream idx(dir / "feats.idx", std::ios::trunc);
  if (!bin || !idx) throw FormatError("cannot write features under " + dir.string());
  std::size_t offset = 0;
  for (const auto& u : utts) {
    if (!u.has_features()) throw ContractError("mixed paired/text-only set " + dir.string());
    bin.write(reinterpret_cast<const char*>(u.features.data()),
              static_cast<std::streamsize>(u.features.size() * sizeof(double)));
    idx << u.id << '\t' << offset << '\t' << u.features.rows() << '\t' << u.features.cols() << '\n';
    offset += u.features.size();
  }
}

std::vector<Utterance> ReadUtteranceSet(const std::filesystem::path& dir, const Lexicon& lex) {
  std::vector<Utterance> utts;
  for (auto& [id, text] : ReadTranscripts(dir / "text.tsv")) {
    Utterance u;
    u.id = id;
    u.chars = encode_chars(text, lex);
    u.syllables = chars_to_syllables(u.chars, lex);
    utts.push_back(std::move(u));
  }
  const auto idx_path = dir / "feats.idx";
  if (!std::filesystem::exists(idx_path)) return utts;
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < utts.size(); ++i) by_id.emplace(utts[i].id, i);
  std::ifstream idx(idx_path);
  std::ifstream bin(dir / "feats.bin", std::ios::binary);
  if (!idx || !bin) throw FormatError("cannot open features under " + dir.string());
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string id;
    std::size_t offset = 0;
    int T = 0, F = 0;
    if (!std::getline(fields, id, '\t') || !(fields >> offset >> T >> F) || T < 1 || F < 1) {
      throw FormatError(idx_path.string() + ": bad index line '" + line + "'");
    }
    auto it = by_id.find(id);
    if (it == by_id.end()) throw FormatError(idx_path.string() + ": no transcript for " + id);
    Tensor feats({T, F});
    bin.seekg(static_cast<std::streamoff>(offset * sizeof(double)));
    if (!bin.read(reinterpret_cast<char*>(feats.data()),
                  static_cast<std::streamsize>(feats.size() * sizeof(double)))) {
      throw FormatError(dir.string() + "/feats.bin: truncated at " + id);
    }
    utts[it->second].features = std::move(feats);
  }
  for (const auto& u : utts) {
    if (!u.has_features()) throw FormatError(idx_path.string() + ": missing features for " + u.id);
  }
  return utts;
}

}  // namespace cifasr
