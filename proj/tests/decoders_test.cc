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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cifasr/decoders.h"
#include "cifasr/errors.h"
#include "cifasr/gradcheck.h"
#include "cifasr/model.h"
#include "cifasr/ops.h"
#include "cifasr/optim.h"
#include "cifasr/train.h"
#include "oracles.h"

namespace cifasr {
namespace {

Tensor Random(Shape shape, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = n(rng);
  return t;
}

std::vector<Parameter*> All(ModelParams& params, std::string_view prefix = "") {
  std::vector<Parameter*> out;
  for (auto& p : params) {
    if (HasPrefix(p->name, prefix)) out.push_back(p.get());
  }
  return out;
}

TEST(CtcLogProbs, RowsNormalizeAndZeroHeadIsUniform) {
  ModelParams params;
  std::mt19937_64 rng(1);
  InitCtcHead(params, 6, 5, rng);
  Tape tape(false);
  ForwardContext ctx{tape, params};
  const Tensor h = Random({4, 6}, rng);
  const Tensor lp = ctc_log_probs(ctx, tape.constant(h)).value();
  for (int t = 0; t < 4; ++t) {
    double z = 0.0;
    for (int v = 0; v < 5; ++v) z += std::exp(lp.at(t, v));
    EXPECT_NEAR(z, 1.0, 1e-9);
  }
  for (auto& p : params) p->value.Fill(0.0);
  const Tensor uniform = ctc_log_probs(ctx, tape.constant(h)).value();
  for (double v : uniform.values()) EXPECT_NEAR(v, -std::log(5.0), 1e-12);
}

TEST(CtcLogProbs, GradientMatchesFiniteDifferences) {
  ModelParams params;
  std::mt19937_64 rng(2);
  InitCtcHead(params, 6, 5, rng);
  const Tensor h = Random({4, 6}, rng);
  const Tensor w = Random({4, 5}, rng);
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, params};
        return ops::sum(ops::mul(ctc_log_probs(ctx, t.constant(h)), t.constant(w)));
      },
      All(params));
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst_param;
}

TEST(CtcLoss, WorkedExampleUniformTwoFrames) {
  Tape tape(false);
  const Var lp = tape.constant(Tensor({2, 2}, std::log(0.5)));
  EXPECT_NEAR(ctc_loss(lp, std::vector<int>{1}).value()[0], -std::log(0.75), 1e-12);
  EXPECT_NEAR(-std::log(0.75), 0.287682, 1e-6);
}

TEST(CtcLoss, EmptyTargetOnCertainBlanks) {
  Tensor lp({3, 3}, -1e4);
  for (int t = 0; t < 3; ++t) lp.at(t, 0) = 0.0;
  Tape tape(false);
  EXPECT_NEAR(ctc_loss(tape.constant(lp), std::vector<int>{}).value()[0], 0.0, 1e-12);
}

TEST(CtcLoss, MatchesExhaustiveEnumeration) {
  const oracle::CtcSuiteResult r = oracle::RunCtcSuite(3, 3);
  EXPECT_EQ(r.instances, 3 * 6 * (4 + 15 + 40));
  EXPECT_GT(r.infeasible, 0);
  EXPECT_EQ(r.infeasible_mismatches, 0);
  EXPECT_LT(r.max_abs_error, 1e-8);
  EXPECT_NEAR(r.worked_example, 0.287682, 1e-6);
}

TEST(CtcLoss, RepeatedLabelsNeedASeparatingBlank) {
  std::mt19937_64 rng(4);
  Tape tape(false);
  const Var lp = tape.constant(oracle::RandomLattice(2, 3, rng));
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{1, 1}), InfeasibleAlignmentError);
  EXPECT_NO_THROW(ctc_loss(lp, std::vector<int>{1, 2}));
}

TEST(CtcLoss, FrameLengthIgnoresPadding) {
  std::mt19937_64 rng(5);
  const Tensor lp = oracle::RandomLattice(5, 3, rng);
  Tensor padded({8, 3}, std::log(1.0 / 3.0));
  for (int t = 0; t < 5; ++t) {
    for (int v = 0; v < 3; ++v) padded.at(t, v) = lp.at(t, v);
  }
  Tape tape(false);
  const std::vector<int> y = {2, 1};
  EXPECT_NEAR(ctc_loss(tape.constant(padded), y, 5).value()[0],
              oracle::CtcByEnumeration(lp, y), 1e-10);
}

TEST(CeLoss, PerfectUniformAndMismatch) {
  ModelParams params;
  std::mt19937_64 rng(6);
  InitCeHead(params, 4, 6, rng);
  Tape tape(false);
  ForwardContext ctx{tape, params};
  const std::vector<int> chars = {3, 4, 5};
  for (auto& p : params) p->value.Fill(0.0);
  EXPECT_NEAR(ce_loss(ctx, tape.constant(Random({3, 4}, rng)), chars).value()[0], std::log(6.0),
              1e-12);
  // A bias that puts all mass on each position's target: feed one-hot rows
  // through an identity-like projection.
  Parameter& w = params.Get("ce.proj.weight");
  Tensor c({3, 4}, 0.0);
  for (int i = 0; i < 3; ++i) {
    c.at(i, i) = 1.0;
    w.value.at(i, chars[i]) = 1e3;
  }
  EXPECT_NEAR(ce_loss(ctx, tape.constant(c), chars).value()[0], 0.0, 1e-12);
  EXPECT_THROW(ce_loss(ctx, tape.constant(c), std::vector<int>{3, 4}), ContractError);
}

TEST(CeLoss, GradientMatchesFiniteDifferences) {
  ModelParams params;
  std::mt19937_64 rng(7);
  InitCeHead(params, 4, 6, rng);
  const Tensor c = Random({3, 4}, rng);
  const std::vector<int> chars = {3, 5, 4};
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, params};
        return ce_loss(ctx, t.constant(c), chars);
      },
      All(params));
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst_param;
}

struct DecoderFixture {
  DecoderConfig config{.num_blocks = 1, .d_model = 8, .num_heads = 2, .d_ffn = 16,
                       .dropout = 0.0, .label_smoothing = 0.1};
  ModelParams params;
  explicit DecoderFixture(std::uint64_t seed = 8) {
    std::mt19937_64 rng(seed);
    InitAttentionDecoder(params, config, 7, rng);
  }
  Tensor Logits(const Tensor& memory, const std::vector<int>& y) {
    Tape tape(false);
    ForwardContext ctx{tape, params};
    return attention_decoder_forward(ctx, tape.constant(memory), y, config).value();
  }
};

TEST(AttentionDecoder, ShapeLaw) {
  DecoderFixture f;
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = std::uniform_int_distribution<int>(0, 9)(rng);
    const int m = std::uniform_int_distribution<int>(1, 6)(rng);
    std::vector<int> y(n);
    for (int& v : y) v = std::uniform_int_distribution<int>(3, 6)(rng);
    EXPECT_EQ(f.Logits(Random({m, 8}, rng), y).shape(), (Shape{n + 1, 7}));
  }
}

TEST(AttentionDecoder, CausalInTheTargets) {
  DecoderFixture f;
  std::mt19937_64 rng(10);
  const Tensor memory = Random({4, 8}, rng);
  const std::vector<int> y = {3, 4, 5, 6, 3};
  const Tensor base = f.Logits(memory, y);
  for (int i = 0; i < 5; ++i) {
    std::vector<int> changed = y;
    for (int j = i; j < 5; ++j) changed[j] = changed[j] == 6 ? 3 : changed[j] + 1;
    const Tensor other = f.Logits(memory, changed);
    // Row r consumes [sos, y_0..y_{r-1}], so rows 0..i see no change.
    for (int r = 0; r <= i; ++r) {
      for (int v = 0; v < 7; ++v) EXPECT_NEAR(base.at(r, v), other.at(r, v), 1e-12);
    }
    double diff = 0.0;
    for (int v = 0; v < 7; ++v) diff = std::max(diff, std::abs(base.at(i + 1, v) - other.at(i + 1, v)));
    EXPECT_GT(diff, 1e-9);
  }
}

TEST(AttentionDecoder, OneBlockGradient) {
  DecoderFixture f;
  std::mt19937_64 rng(11);
  const Tensor memory = Random({3, 8}, rng);
  const std::vector<int> y = {3, 5, 4};
  GradCheckOptions opt;
  opt.max_entries_per_param = 4;
  opt.rel_floor = 1e-5;
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, f.params};
        const Var logits = attention_decoder_forward(ctx, t.constant(memory), y, f.config);
        return aed_loss(logits, y, f.config.label_smoothing);
      },
      All(f.params), opt);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param;
}

TEST(AedLoss, NoSmoothingIsPlainCrossEntropy) {
  std::mt19937_64 rng(12);
  const Tensor logits = Random({4, 7}, rng);
  const std::vector<int> y = {3, 6, 4};
  const std::vector<int> targets = {3, 6, 4, kSosEosId};
  double ref = 0.0;
  for (int r = 0; r < 4; ++r) {
    double z = 0.0;
    for (int v = 0; v < 7; ++v) z += std::exp(logits.at(r, v));
    ref += std::log(z) - logits.at(r, targets[r]);
  }
  Tape tape(false);
  EXPECT_NEAR(aed_loss(tape.constant(logits), y, 0.0).value()[0], ref / 4.0, 1e-12);
  EXPECT_THROW(aed_loss(tape.constant(logits), std::vector<int>{3}, 0.0), ContractError);
}

TEST(AedLoss, SmoothingFloorMatchesClosedForm) {
  // One row, target logit 5 above the rest: p̂_t = e^5/(e^5+V−1).
  const int V = 7;
  const double eps = 0.1;
  Tensor logits({1, V}, 0.0);
  logits.at(0, kSosEosId) = 5.0;
  const double z = std::exp(5.0) + (V - 1);
  const double want = -((1 - eps) * (5.0 - std::log(z)) + eps * (0.0 - std::log(z)));
  Tape tape(false);
  const double got = aed_loss(tape.constant(logits), std::vector<int>{}, eps).value()[0];
  EXPECT_NEAR(got, want, 1e-12);
  EXPECT_GT(got, 0.0);
}

TEST(AedLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  ModelParams params;
  params.Add("logits", Random({3, 7}, rng));
  const std::vector<int> y = {4, 5};
  const auto rep = grad_check(
      [&](Tape& t) { return aed_loss(t.param(params.Get("logits")), y, 0.1); }, All(params));
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst_param;
}

TEST(JointLoss, WeightedTotal) {
  const LossBundle terms{2.0, 1.0, 2.0, 3.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(joint_loss(terms, LossWeights{}).total, 7.0);
  EXPECT_EQ(joint_loss(terms, LossWeights{0, 0, 0, 0, 0}).total, 0.0);
}

TEST(JointLoss, RandomRecomputationAndLinearity) {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const LossBundle t{u(rng), u(rng), u(rng), u(rng), u(rng), 0.0};
    const LossWeights a{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const LossWeights b{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const LossWeights ab{a.ctc + b.ctc, a.qua + b.qua, a.ce + b.ce, a.aed + b.aed, a.mae + b.mae};
    const double ref = a.ctc * t.ctc + a.qua * t.qua + a.ce * t.ce + a.aed * t.aed + a.mae * t.mae;
    EXPECT_NEAR(joint_loss(t, a).total, ref, 1e-9);
    EXPECT_NEAR(joint_loss(t, ab).total, joint_loss(t, a).total + joint_loss(t, b).total, 1e-9);
  }
}

TEST(JointLoss, VarMatchesBundle) {
  Tape tape(false);
  LossTerms terms;
  terms.ctc = tape.constant(Tensor::Scalar(2.0));
  terms.qua = tape.constant(Tensor::Scalar(1.0));
  terms.ce = tape.constant(Tensor::Scalar(2.0));
  terms.aed = tape.constant(Tensor::Scalar(3.0));
  terms.mae = tape.constant(Tensor::Scalar(1.0));
  EXPECT_DOUBLE_EQ(joint_loss(terms, LossWeights{}).value()[0], 7.0);
  EXPECT_DOUBLE_EQ(joint_loss(terms.Values(), LossWeights{}).total, 7.0);
}

TEST(LossWeights, NegativeRejected) {
  LossWeights w;
  w.mae = -0.1;
  EXPECT_THROW(w.Validate(), ContractError);
}

TEST(TextOnlyLoss, IsDecoderLossOverSyllableEncoderOutput) {
  const ModelConfig config = oracle::TinyModelConfig();
  ModelParams params = InitModel(config, 15);
  const std::vector<int> chars = {3, 5, 7, 4};
  const std::vector<int> syl = {3, 4, 5, 3};
  Tape tape(false);
  ForwardContext ctx{tape, params};
  const double got =
      text_only_loss(ctx, syl, chars, config.syllable_encoder, config.decoder).value()[0];
  const Var s = syllable_encode(ctx, syl, config.syllable_encoder);
  const double want =
      aed_loss(attention_decoder_forward(ctx, s, chars, config.decoder), chars,
               config.decoder.label_smoothing)
          .value()[0];
  EXPECT_EQ(got, want);
  EXPECT_THROW(text_only_loss(ctx, std::vector<int>{3}, chars, config.syllable_encoder,
                              config.decoder),
               ContractError);
}

TEST(TextOnlyLoss, FrozenModulesGetNoGradient) {
  const ModelConfig config = oracle::TinyModelConfig();
  ModelParams params = InitModel(config, 16);
  freeze_for_text_only(params);
  Tape tape;
  ForwardContext ctx{tape, params};
  const std::vector<int> chars = {3, 5, 7};
  const std::vector<int> syl = {3, 4, 5};
  tape.backward(text_only_loss(ctx, syl, chars, config.syllable_encoder, config.decoder));
  int decoder_with_grad = 0;
  for (auto& p : params) {
    if (HasPrefix(p->name, "decoder.")) {
      decoder_with_grad += p->grad.size() > 0 ? 1 : 0;
      continue;
    }
    for (double g : p->grad.values()) ASSERT_EQ(g, 0.0) << p->name;
  }
  EXPECT_GT(decoder_with_grad, 0);
}

TEST(TextOnlyLoss, DecreasesOnAToySet) {
  const ModelConfig config = oracle::TinyModelConfig();
  ModelParams params = InitModel(config, 17);
  freeze_for_text_only(params);
  const std::vector<std::vector<int>> chars = {
      {3, 4, 5}, {6, 7, 3, 4}, {5, 5, 6}, {7, 3}, {4, 6, 7, 5}};
  std::vector<std::vector<int>> syl;
  for (const auto& c : chars) {
    std::vector<int> s;
    for (int id : c) s.push_back(3 + (id - 3) % 3);
    syl.push_back(s);
  }
  AdamState adam(AdamConfig{.base_lr = 0.5, .warmup_steps = 10, .d_model = 8});
  auto total = [&](bool train) {
    double sum = 0.0;
    Tape tape(train);
    ForwardContext ctx{tape, params};
    Var loss;
    for (std::size_t i = 0; i < chars.size(); ++i) {
      Var l = text_only_loss(ctx, syl[i], chars[i], config.syllable_encoder, config.decoder);
      sum += l.value()[0];
      loss = loss.valid() ? ops::add(loss, l) : l;
    }
    if (train) {
      tape.backward(loss);
      adam_step(params, adam);
    }
    return sum / chars.size();
  };
  const double before = total(false);
  for (int step = 0; step < 50; ++step) total(true);
  const double after = total(false);
  EXPECT_LT(after, 0.8 * before) << before << " -> " << after;
}

}  // namespace
}  // namespace cifasr
