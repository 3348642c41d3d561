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

#include "cifasr/match.h"

#include <cmath>
#include <limits>
#include <memory>

#include <nlohmann/json.hpp>

#include "cifasr/errors.h"

namespace cifasr {

namespace {

constexpr int kWeightConvWidth = 3;

struct FireInterval {
  double lo;
  double hi;
};

}  // namespace

double CifWeights::Sum() const {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return s;
}

double FireSpan::Total() const {
  double s = 0.0;
  for (double p : portions) s += p;
  return s;
}

std::vector<int> CifOutput::FireFrames() const {
  std::vector<int> frames;
  frames.reserve(fires.size());
  for (const FireSpan& f : fires) frames.push_back(f.fire_frame);
  return frames;
}

void InitCifWeightParams(ModelParams& params, int d_model, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kWeightConvWidth * d_model));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor w({kWeightConvWidth, d_model, d_model});
  for (double& v : w.values()) v = u(rng);
  Tensor b({d_model});
  for (double& v : b.values()) v = u(rng);
  params.Add("cif.conv.weight", std::move(w));
  params.Add("cif.conv.bias", std::move(b));
  layers::InitLinear(params, "cif.proj", d_model, 1, rng);
}

void InitSyllableEncoderParams(ModelParams& params, const SyllableEncoderConfig& config,
                               int syllable_vocab, std::mt19937_64& rng) {
  if (config.d_model % config.num_heads != 0) {
    throw ContractError("syllable encoder: d_model not divisible by num_heads");
  }
  layers::InitEmbedding(params, "syllenc.embed", syllable_vocab, config.d_model, rng);
  for (int b = 0; b < config.num_blocks; ++b) {
    layers::InitTransformerBlock(params, "syllenc.blocks." + std::to_string(b),
                                 config.d_model, config.d_ffn, rng);
  }
  layers::InitLayerNorm(params, "syllenc.norm_out", config.d_model);
}

CifWeights cif_weights(ForwardContext& ctx, const Var& h, int valid_len) {
  const int L = h.value().rows();
  if (L < 1) throw DimensionError("cif_weights: empty input");
  Var x = ops::mask_rows(h, valid_len);
  x = ops::conv1d(x, ctx.P("cif.conv.weight"), 1, (kWeightConvWidth - 1) / 2);
  x = ops::gelu(ops::add_row(x, ctx.P("cif.conv.bias")));
  x = ops::sigmoid(layers::Linear(ctx, "cif.proj", x));
  x = ops::mask_rows(x, valid_len);
  return CifWeights{ops::reshape(x, {L}), false, 1.0};
}

CifWeights scale_weights(const CifWeights& w, int target_length) {
  if (target_length < 1) throw ContractError("scale_weights: target length must be positive");
  const double total = w.Sum();
  if (!(total > 0.0)) {
    throw DegenerateWeightsError("scale_weights: weights sum to " + std::to_string(total));
  }
  const double k = target_length / total;
  const Tensor& A = w.a.value();
  Tensor out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = A[i] * k;
  const int ia = w.a.id();
  const double I = target_length;
  Var scaled = w.a.tape().record(std::move(out), {ia}, [ia, total, I](Tape& t, int self) {
    // d a'_l / d a_k = δ_lk·I/S − a_l·I/S².
    const Tensor& g = t.grad(self);
    const Tensor& A = t.value(ia);
    double ga = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) ga += g[i] * A[i];
    Tensor& gx = t.grad(ia);
    for (std::size_t i = 0; i < A.size(); ++i) {
      gx[i] += g[i] * I / total - ga * I / (total * total);
    }
  });
  return CifWeights{scaled, true, w.scale_factor * k};
}

CifOutput cif_fire(const Var& h, const CifWeights& w, const CifOptions& options) {
  const Tensor& H = h.value();
  const Tensor& A = w.a.value();
  const int L = H.rows();
  const int d = H.cols();
  const double beta = options.threshold;
  if (!(beta > 0.0)) throw ContractError("cif_fire: threshold must be positive");
  if (A.ndim() != 1 || A.dim(0) != L) {
    throw DimensionError("cif_fire: weights " + ShapeString(A.shape()) + " for " +
                         std::to_string(L) + " frames");
  }
  if (!A.AllFinite()) throw NumericError("cif_fire: non-finite weights");

  std::vector<double> prefix(L + 1, 0.0);
  for (int u = 0; u < L; ++u) prefix[u + 1] = prefix[u] + A[u];
  const double total = prefix[L];

  auto intervals = std::make_shared<std::vector<FireInterval>>();
  int full = 0;
  while ((full + 1) * beta <= total) {
    intervals->push_back({full * beta, (full + 1) * beta});
    ++full;
  }
  const double residue = total - full * beta;
  const bool tail = residue > 0.0 && ((options.fire_tail && residue >= kCifTailFraction * beta) ||
                                      (options.force_nonempty && full == 0));
  if (tail) intervals->push_back({full * beta, std::numeric_limits<double>::infinity()});

  CifOutput out;
  const int n = static_cast<int>(intervals->size());
  if (n == 0) return out;
  out.fires.resize(n);
  Tensor c({n, d}, 0.0);
  for (int i = 0; i < n; ++i) {
    const FireInterval iv = (*intervals)[i];
    FireSpan& span = out.fires[i];
    for (int u = 0; u < L; ++u) {
      const double portion = std::min(prefix[u + 1], iv.hi) - std::max(prefix[u], iv.lo);
      if (portion <= 0.0) continue;
      span.frames.push_back(u);
      span.portions.push_back(portion);
      span.fire_frame = u;
      c.mat().row(i) += portion * H.mat().row(u);
    }
  }

  auto spans = std::make_shared<std::vector<FireSpan>>(out.fires);
  const int ih = h.id(), ia = w.a.id();
  out.c = h.tape().record(std::move(c), {ih, ia}, [ih, ia, spans, intervals, L](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& H = t.value(ih);
    const bool need_h = t.requires_grad(ih), need_a = t.requires_grad(ia);
    std::vector<double> prefix(L + 1, 0.0);
    const Tensor& A = t.value(ia);
    for (int u = 0; u < L; ++u) prefix[u + 1] = prefix[u] + A[u];
    // Gradient w.r.t. each running sum A_u, then a suffix sum to reach a.
    std::vector<double> g_prefix(L + 1, 0.0);
    for (std::size_t i = 0; i < spans->size(); ++i) {
      const FireSpan& span = (*spans)[i];
      const FireInterval iv = (*intervals)[i];
      for (std::size_t k = 0; k < span.frames.size(); ++k) {
        const int u = span.frames[k];
        if (need_h) t.grad(ih).mat().row(u) += span.portions[k] * g.mat().row(i);
        if (!need_a) continue;
        const double gp = g.mat().row(i).dot(H.mat().row(u));
        if (prefix[u + 1] < iv.hi) g_prefix[u + 1] += gp;
        if (prefix[u] > iv.lo) g_prefix[u] -= gp;
      }
    }
    if (!need_a) return;
    Tensor& ga = t.grad(ia);
    double running = 0.0;
    for (int u = L - 1; u >= 0; --u) {
      running += g_prefix[u + 1];
      ga[u] += running;
    }
  });
  return out;
}

Var quantity_loss(const CifWeights& w, int target_length) {
  return ops::abs(ops::add_scalar(ops::sum(w.a), -static_cast<double>(target_length)));
}

Var syllable_encode(ForwardContext& ctx, std::span<const int> syllables,
                    const SyllableEncoderConfig& config) {
  if (syllables.empty()) throw ContractError("syllable_encode: empty sequence");
  Var x = layers::EmbedTokens(ctx, "syllenc.embed", syllables);
  const int n = static_cast<int>(syllables.size());
  for (int b = 0; b < config.num_blocks; ++b) {
    x = layers::TransformerBlock(ctx, "syllenc.blocks." + std::to_string(b), x,
                                 config.num_heads, n);
  }
  return layers::LayerNorm(ctx, "syllenc.norm_out", x);
}

Var mae_loss(const Var& c, const Var& s) { return ops::mean_abs_error(c, s); }

std::string FireBoundariesJson(const CifOutput& out, const CifWeights& w) {
  nlohmann::json fires = nlohmann::json::array();
  for (const FireSpan& f : out.fires) {
    fires.push_back({{"frame", f.fire_frame}, {"frames", f.frames}, {"portions", f.portions}});
  }
  return nlohmann::json{{"scaled", w.scaled}, {"weights", w.a.value().storage()}, {"fires", fires}}
      .dump();
}

}  // namespace cifasr
