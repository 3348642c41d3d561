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

#include "cifasr/decode.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

// Log-probability of prefixes ending in blank / in their last label.
struct PrefixScore {
  double blank = kNegInf;
  double label = kNegInf;

  double total() const { return LogAdd(blank, label); }
};

using Beam = std::map<std::vector<int>, PrefixScore>;

std::vector<std::pair<std::vector<int>, PrefixScore>> TopPrefixes(const Beam& beam, int k) {
  std::vector<std::pair<std::vector<int>, PrefixScore>> items;
  items.reserve(beam.size());
  // Prefixes no path can produce (a repeat with no room for a blank) are dropped.
  for (const auto& item : beam) {
    if (item.second.total() > kNegInf) items.push_back(item);
  }
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second.total() > b.second.total();
  });
  if (static_cast<int>(items.size()) > k) items.resize(k);
  return items;
}

}  // namespace

void DecodeConfig::Validate() const {
  if (beam < 1 || nbest < 1) throw ContractError("decode config: beam and nbest must be positive");
  if (!(ctc_weight >= 0.0 && ctc_weight <= 1.0)) {
    throw ContractError("decode config: ctc_weight outside [0,1]");
  }
}

std::vector<Hypothesis> ctc_prefix_beam_search(const Tensor& log_probs, int beam, int frame_len) {
  if (beam < 1) throw ContractError("ctc_prefix_beam_search: beam must be positive");
  if (log_probs.ndim() != 2) throw DimensionError("ctc_prefix_beam_search: expected L×V");
  const int V = log_probs.cols();
  const int T = (frame_len < 0 || frame_len > log_probs.rows()) ? log_probs.rows() : frame_len;
  std::vector<std::pair<std::vector<int>, PrefixScore>> current{{{}, PrefixScore{0.0, kNegInf}}};
  for (int t = 0; t < T; ++t) {
    Beam next;
    for (const auto& [prefix, score] : current) {
      const double total = score.total();
      PrefixScore& stay = next[prefix];
      stay.blank = LogAdd(stay.blank, total + log_probs.at(t, kBlankId));
      for (int k = 0; k < V; ++k) {
        if (k == kBlankId) continue;
        const double p = log_probs.at(t, k);
        std::vector<int> extended = prefix;
        extended.push_back(k);
        PrefixScore& ext = next[extended];
        if (!prefix.empty() && prefix.back() == k) {
          // A repeat needs a blank in between; without one it merges.
          ext.label = LogAdd(ext.label, score.blank + p);
          PrefixScore& same = next[prefix];
          same.label = LogAdd(same.label, score.label + p);
        } else {
          ext.label = LogAdd(ext.label, total + p);
        }
      }
    }
    current = TopPrefixes(next, beam);
  }
  std::vector<Hypothesis> out;
  out.reserve(current.size());
  for (auto& [prefix, score] : current) {
    Hypothesis h;
    h.ids = prefix;
    h.ctc_score = score.total();
    h.combined = h.ctc_score;
    out.push_back(std::move(h));
  }
  return out;
}

double attention_score(ForwardContext& ctx, const Var& memory, std::span<const int> ids,
                       const DecoderConfig& config) {
  Var logits = attention_decoder_forward(ctx, memory, ids, config);
  Var lp = ops::log_softmax(logits);
  const Tensor& L = lp.value();
  double s = 0.0;
  for (std::size_t i = 0; i < ids.size(); ++i) s += L.at(static_cast<int>(i), ids[i]);
  s += L.at(static_cast<int>(ids.size()), kSosEosId);
  return s;
}

std::vector<Hypothesis> attention_rescore(std::vector<Hypothesis> nbest, ForwardContext& ctx,
                                          const Var& memory, const DecoderConfig& decoder,
                                          double ctc_weight, double length_bonus) {
  if (nbest.empty()) throw ContractError("attention_rescore: empty n-best list");
  for (Hypothesis& h : nbest) {
    h.att_score = attention_score(ctx, memory, h.ids, decoder);
    h.combined = ctc_weight * h.ctc_score + (1.0 - ctc_weight) * h.att_score +
                 length_bonus * static_cast<double>(h.ids.size());
  }
  std::stable_sort(nbest.begin(), nbest.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.combined > b.combined; });
  return nbest;
}

double CerReport::cer() const {
  return static_cast<double>(errors()) / static_cast<double>(std::max(1, ref_length));
}

CerReport& CerReport::operator+=(const CerReport& other) {
  substitutions += other.substitutions;
  deletions += other.deletions;
  insertions += other.insertions;
  ref_length += other.ref_length;
  return *this;
}

CerReport cer(std::span<const int> ref, std::span<const int> hyp) {
  const int n = static_cast<int>(ref.size()), m = static_cast<int>(hyp.size());
  std::vector<std::vector<int>> d(n + 1, std::vector<int>(m + 1, 0));
  for (int i = 0; i <= n; ++i) d[i][0] = i;
  for (int j = 0; j <= m; ++j) d[0][j] = j;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0), d[i - 1][j] + 1,
                          d[i][j - 1] + 1});
    }
  }
  CerReport r;
  r.ref_length = n;
  int i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1] ? 1 : 0)) {
      if (ref[i - 1] != hyp[j - 1]) ++r.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      ++r.deletions;
      --i;
    } else {
      ++r.insertions;
      --j;
    }
  }
  return r;
}

std::vector<int> decode_utterance(const ModelConfig& model, ModelParams& params,
                                  const Tensor& features, const DecodeConfig& config) {
  Tape tape(false);
  ForwardContext ctx{tape, params};
  AcousticForward f = acoustic_forward(ctx, model, features);
  std::vector<Hypothesis> nbest =
      ctc_prefix_beam_search(f.ctc_log_probs.value(), config.beam, f.enc.valid_length);
  if (static_cast<int>(nbest.size()) > config.nbest) nbest.resize(config.nbest);
  if (config.ctc_only || f.cif.num_fires() == 0) return nbest.front().ids;
  nbest = attention_rescore(std::move(nbest), ctx, f.cif.c, model.decoder, config.ctc_weight,
                            config.length_bonus);
  return nbest.front().ids;
}

EvalResult evaluate(std::span<const Utterance> dataset, const ModelConfig& model,
                    ModelParams& params, const DecodeConfig& config) {
  config.Validate();
  EvalResult result;
  result.utterances.reserve(dataset.size());
  for (const Utterance& u : dataset) {
    if (!u.has_features()) throw ContractError("evaluate: utterance " + u.id + " has no audio");
    UtteranceResult r;
    r.id = u.id;
    r.ref = u.chars.ids;
    r.hyp = decode_utterance(model, params, u.features, config);
    r.report = cer(r.ref, r.hyp);
    if (r.ref.empty()) {
      ++result.skipped_empty_refs;
    } else {
      result.corpus += r.report;
    }
    result.utterances.push_back(std::move(r));
  }
  if (result.skipped_empty_refs > 0) {
    std::cerr << "warning: " << result.skipped_empty_refs
              << " utterance(s) with an empty reference left out of the corpus CER\n";
  }
  return result;
}

void WriteResults(const std::filesystem::path& path, const EvalResult& result, const Lexicon& lex) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const UtteranceResult& r : result.utterances) {
    out << r.id << '\t' << decode_ids(TokenSeq{r.ref, UnitKind::kCharacter}, lex) << '\t'
        << decode_ids(TokenSeq{r.hyp, UnitKind::kCharacter}, lex) << '\t' << r.report.cer()
        << '\n';
  }
}

std::string SummaryJson(const EvalResult& result) {
  const CerReport& c = result.corpus;
  return nlohmann::json{{"cer", result.cer()},
                        {"substitutions", c.substitutions},
                        {"deletions", c.deletions},
                        {"insertions", c.insertions},
                        {"ref_length", c.ref_length},
                        {"utterances", result.utterances.size()},
                        {"skipped_empty_refs", result.skipped_empty_refs}}
      .dump(2);
}

}  // namespace cifasr
