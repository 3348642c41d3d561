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

#include "cifasr/decoders.h"

#include <cmath>
#include <limits>
#include <memory>

#include "cifasr/errors.h"
#include "cifasr/lexicon.h"

namespace cifasr {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double LogAdd(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

std::vector<int> WithBlanks(std::span<const int> target) {
  std::vector<int> ext(2 * target.size() + 1, kBlankId);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  return ext;
}

// Alignment transitions into s may skip the preceding blank only between
// distinct labels.
bool CanSkip(const std::vector<int>& ext, int s) {
  return s >= 2 && ext[s] != kBlankId && ext[s] != ext[s - 2];
}

}  // namespace

void LossWeights::Validate() const {
  for (double w : {ctc, qua, ce, aed, mae}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ContractError("loss weights must be non-negative");
  }
}

LossBundle LossTerms::Values() const {
  auto v = [](const Var& x) { return x.valid() ? x.value().item() : 0.0; };
  return LossBundle{v(ctc), v(qua), v(ce), v(aed), v(mae), 0.0};
}

void InitCtcHead(ModelParams& params, int d_model, int vocab, std::mt19937_64& rng) {
  layers::InitLinear(params, "ctc.proj", d_model, vocab, rng);
}

void InitCeHead(ModelParams& params, int d_model, int vocab, std::mt19937_64& rng) {
  layers::InitLinear(params, "ce.proj", d_model, vocab, rng);
}

void InitAttentionDecoder(ModelParams& params, const DecoderConfig& config, int vocab,
                          std::mt19937_64& rng) {
  if (config.d_model % config.num_heads != 0) {
    throw ContractError("decoder: d_model not divisible by num_heads");
  }
  const int d = config.d_model;
  layers::InitEmbedding(params, "decoder.embed", vocab, d, rng);
  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string p = "decoder.blocks." + std::to_string(b);
    layers::InitLayerNorm(params, p + ".norm_self", d);
    layers::InitAttention(params, p + ".self_att", d, rng);
    layers::InitLayerNorm(params, p + ".norm_cross", d);
    layers::InitAttention(params, p + ".cross_att", d, rng);
    layers::InitLayerNorm(params, p + ".norm_ff", d);
    layers::InitFeedForward(params, p + ".ff", d, config.d_ffn, rng);
  }
  layers::InitLayerNorm(params, "decoder.norm_out", d);
  layers::InitLinear(params, "decoder.proj", d, vocab, rng);
}

Var ctc_log_probs(ForwardContext& ctx, const Var& h) {
  return ops::log_softmax(layers::Linear(ctx, "ctc.proj", h));
}

Var ctc_loss(const Var& log_probs, std::span<const int> target, int frame_len) {
  const Tensor& LP = log_probs.value();
  if (LP.ndim() != 2) throw DimensionError("ctc_loss: expected L×V log-probabilities");
  const int V = LP.cols();
  const int T = (frame_len < 0 || frame_len > LP.rows()) ? LP.rows() : frame_len;
  int required = static_cast<int>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i] <= kBlankId || target[i] >= V) {
      throw ContractError("ctc_loss: label " + std::to_string(target[i]) + " outside (0, " +
                          std::to_string(V) + ")");
    }
    if (i > 0 && target[i] == target[i - 1]) ++required;
  }
  if (T < required || T < 1) {
    throw InfeasibleAlignmentError("ctc_loss: " + std::to_string(T) + " frames cannot carry " +
                                   std::to_string(target.size()) + " labels");
  }

  auto ext = std::make_shared<std::vector<int>>(WithBlanks(target));
  const int S = static_cast<int>(ext->size());
  auto alpha = std::make_shared<std::vector<double>>(static_cast<std::size_t>(T) * S, kNegInf);
  auto A = [&](int t, int s) -> double& { return (*alpha)[static_cast<std::size_t>(t) * S + s]; };
  A(0, 0) = LP.at(0, (*ext)[0]);
  if (S > 1) A(0, 1) = LP.at(0, (*ext)[1]);
  for (int t = 1; t < T; ++t) {
    for (int s = 0; s < S; ++s) {
      double acc = A(t - 1, s);
      if (s >= 1) acc = LogAdd(acc, A(t - 1, s - 1));
      if (CanSkip(*ext, s)) acc = LogAdd(acc, A(t - 1, s - 2));
      if (acc != kNegInf) A(t, s) = acc + LP.at(t, (*ext)[s]);
    }
  }
  double log_p = A(T - 1, S - 1);
  if (S > 1) log_p = LogAdd(log_p, A(T - 1, S - 2));
  if (log_p == kNegInf) throw InfeasibleAlignmentError("ctc_loss: target has zero probability");

  const int ilp = log_probs.id();
  return log_probs.tape().record(
      Tensor::Scalar(-log_p), {ilp}, [ilp, ext, alpha, T, S, log_p](Tape& t, int self) {
        const double g = t.grad(self)[0];
        const Tensor& LP = t.value(ilp);
        Tensor& glp = t.grad(ilp);
        std::vector<double> beta(static_cast<std::size_t>(T) * S, kNegInf);
        auto B = [&](int tt, int s) -> double& {
          return beta[static_cast<std::size_t>(tt) * S + s];
        };
        B(T - 1, S - 1) = LP.at(T - 1, (*ext)[S - 1]);
        if (S > 1) B(T - 1, S - 2) = LP.at(T - 1, (*ext)[S - 2]);
        for (int tt = T - 2; tt >= 0; --tt) {
          for (int s = 0; s < S; ++s) {
            double acc = B(tt + 1, s);
            if (s + 1 < S) acc = LogAdd(acc, B(tt + 1, s + 1));
            if (s + 2 < S && CanSkip(*ext, s + 2)) acc = LogAdd(acc, B(tt + 1, s + 2));
            if (acc != kNegInf) B(tt, s) = acc + LP.at(tt, (*ext)[s]);
          }
        }
        for (int tt = 0; tt < T; ++tt) {
          for (int s = 0; s < S; ++s) {
            const double a = (*alpha)[static_cast<std::size_t>(tt) * S + s];
            const double b = B(tt, s);
            if (a == kNegInf || b == kNegInf) continue;
            const int k = (*ext)[s];
            glp.at(tt, k) -= g * std::exp(a + b - LP.at(tt, k) - log_p);
          }
        }
      });
}

Var ce_loss(ForwardContext& ctx, const Var& c, std::span<const int> chars) {
  if (c.value().rows() != static_cast<int>(chars.size())) {
    throw ContractError("ce_loss: " + std::to_string(c.value().rows()) + " embeddings for " +
                        std::to_string(chars.size()) + " characters");
  }
  return ops::label_smoothed_cross_entropy(layers::Linear(ctx, "ce.proj", c), chars, 0.0);
}

Var attention_decoder_forward(ForwardContext& ctx, const Var& memory, std::span<const int> y,
                              const DecoderConfig& config) {
  if (!memory.valid() || memory.value().rows() < 1) {
    throw ContractError("attention decoder: empty memory");
  }
  std::vector<int> input;
  input.reserve(y.size() + 1);
  input.push_back(kSosEosId);
  input.insert(input.end(), y.begin(), y.end());
  const int n = static_cast<int>(input.size());
  const int mem_len = memory.value().rows();
  Var x = layers::EmbedTokens(ctx, "decoder.embed", input);
  for (int b = 0; b < config.num_blocks; ++b) {
    const std::string p = "decoder.blocks." + std::to_string(b);
    Var q = layers::LayerNorm(ctx, p + ".norm_self", x);
    x = ops::add(x, ctx.Dropout(layers::MultiHeadAttention(ctx, p + ".self_att", q, q,
                                                           config.num_heads, n, true)));
    q = layers::LayerNorm(ctx, p + ".norm_cross", x);
    x = ops::add(x, ctx.Dropout(layers::MultiHeadAttention(ctx, p + ".cross_att", q, memory,
                                                           config.num_heads, mem_len, false)));
    q = layers::LayerNorm(ctx, p + ".norm_ff", x);
    x = ops::add(x, ctx.Dropout(layers::FeedForward(ctx, p + ".ff", q)));
  }
  x = layers::LayerNorm(ctx, "decoder.norm_out", x);
  return layers::Linear(ctx, "decoder.proj", x);
}

Var aed_loss(const Var& logits, std::span<const int> y, double label_smoothing) {
  std::vector<int> targets(y.begin(), y.end());
  targets.push_back(kSosEosId);
  if (logits.value().rows() != static_cast<int>(targets.size())) {
    throw ContractError("aed_loss: " + std::to_string(logits.value().rows()) +
                        " logit rows for " + std::to_string(targets.size()) + " targets");
  }
  return ops::label_smoothed_cross_entropy(logits, targets, label_smoothing);
}

LossBundle joint_loss(const LossBundle& terms, const LossWeights& w) {
  LossBundle out = terms;
  out.total = w.ctc * terms.ctc + w.qua * terms.qua + w.ce * terms.ce + w.aed * terms.aed +
              w.mae * terms.mae;
  return out;
}

Var joint_loss(const LossTerms& terms, const LossWeights& w) {
  Var total;
  auto add = [&](const Var& term, double weight) {
    if (!term.valid() || weight == 0.0) return;
    Var scaled = ops::scale(term, weight);
    total = total.valid() ? ops::add(total, scaled) : scaled;
  };
  add(terms.ctc, w.ctc);
  add(terms.qua, w.qua);
  add(terms.ce, w.ce);
  add(terms.aed, w.aed);
  add(terms.mae, w.mae);
  if (!total.valid()) throw ContractError("joint_loss: no active term");
  return total;
}

Var text_only_loss(ForwardContext& ctx, std::span<const int> syllables, std::span<const int> chars,
                   const SyllableEncoderConfig& syllable_config,
                   const DecoderConfig& decoder_config) {
  if (syllables.size() != chars.size()) {
    throw ContractError("text_only_loss: " + std::to_string(syllables.size()) +
                        " syllables for " + std::to_string(chars.size()) + " characters");
  }
  Var s = syllable_encode(ctx, syllables, syllable_config);
  Var logits = attention_decoder_forward(ctx, s, chars, decoder_config);
  return aed_loss(logits, chars, decoder_config.label_smoothing);
}

}  // namespace cifasr
