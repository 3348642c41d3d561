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
#include <nlohmann/json.hpp>

#include "cifasr/encoder.h"
#include "cifasr/errors.h"
#include "cifasr/gradcheck.h"
#include "cifasr/match.h"
#include "cifasr/model.h"
#include "cifasr/ops.h"
#include "oracles.h"

namespace cifasr {
namespace {

Tensor Vector(std::vector<double> v) {
  Tensor t({static_cast<int>(v.size())});
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i];
  return t;
}

Tensor Random(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = n(rng);
  return t;
}

CifWeights Weights(Tape& tape, std::vector<double> a) {
  return CifWeights{tape.constant(Vector(std::move(a))), false, 1.0};
}

TEST(CifWeights, ZeroParametersGiveOneHalf) {
  ModelParams params;
  std::mt19937_64 rng(1);
  InitCifWeightParams(params, 8, rng);
  for (auto& p : params) p->value.Fill(0.0);
  Tape tape(false);
  ForwardContext ctx{tape, params};
  const CifWeights w = cif_weights(ctx, tape.constant(Random({6, 8}, rng)), 6);
  for (double v : w.a.value().values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(CifWeights, PaddingFramesWeighExactlyZero) {
  ModelParams params;
  std::mt19937_64 rng(2);
  InitCifWeightParams(params, 8, rng);
  Tape tape(false);
  ForwardContext ctx{tape, params};
  const CifWeights w = cif_weights(ctx, tape.constant(Random({9, 8}, rng)), 5);
  for (int l = 0; l < 9; ++l) {
    if (l < 5) {
      EXPECT_GT(w.a.value()[l], 0.0);
    } else {
      EXPECT_EQ(w.a.value()[l], 0.0);
    }
  }
}

TEST(CifWeights, GradientMatchesFiniteDifferences) {
  ModelParams params;
  std::mt19937_64 rng(3);
  InitCifWeightParams(params, 6, rng);
  const Tensor h = Random({7, 6}, rng);
  const Tensor r = Random({7}, rng);
  std::vector<Parameter*> ps;
  for (auto& p : params) ps.push_back(p.get());
  GradCheckOptions opt;
  opt.max_entries_per_param = 8;
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, params};
        return ops::sum(ops::mul(cif_weights(ctx, t.constant(h), 6).a, t.constant(r)));
      },
      ps, opt);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param;
}

TEST(ScaleWeights, ProportionalAndFixedPoint) {
  Tape tape(false);
  const CifWeights s = scale_weights(Weights(tape, {0.4, 0.4, 0.4, 0.4}), 2);
  EXPECT_TRUE(s.scaled);
  for (double v : s.a.value().values()) EXPECT_NEAR(v, 0.5, 1e-15);
  const std::vector<double> a = {0.25, 0.5, 1.0, 0.25};
  const CifWeights same = scale_weights(Weights(tape, a), 2);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(same.a.value()[i], a[i]);
}

TEST(ScaleWeights, SumsToTargetOnRandomInputs) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int L = std::uniform_int_distribution<int>(1, 30)(rng);
    const int I = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<double> a(L);
    for (double& v : a) v = u(rng) + 1e-3;
    Tape tape(false);
    EXPECT_NEAR(scale_weights(Weights(tape, a), I).Sum(), I, 1e-9);
  }
}

TEST(ScaleWeights, DegenerateWeightsThrow) {
  Tape tape(false);
  EXPECT_THROW(scale_weights(Weights(tape, {0.0, 0.0, 0.0}), 2), DegenerateWeightsError);
  EXPECT_THROW(scale_weights(Weights(tape, {0.5}), 0), ContractError);
}

TEST(CifFire, ExactHalves) {
  Tape tape(false);
  Tensor h({4, 1});
  for (int i = 0; i < 4; ++i) h.at(i, 0) = i + 1;
  const CifOutput out = cif_fire(tape.constant(h), Weights(tape, {0.5, 0.5, 0.5, 0.5}));
  ASSERT_EQ(out.num_fires(), 2);
  EXPECT_DOUBLE_EQ(out.c.value().at(0, 0), 1.5);
  EXPECT_DOUBLE_EQ(out.c.value().at(1, 0), 3.5);
  EXPECT_EQ(out.FireFrames(), (std::vector<int>{1, 3}));
}

TEST(CifFire, SplitFrameCarriesRemainder) {
  Tape tape(false);
  std::mt19937_64 rng(5);
  const Tensor h = Random({3, 4}, rng);
  const CifOutput out = cif_fire(tape.constant(h), Weights(tape, {0.7, 0.6, 0.7}));
  ASSERT_EQ(out.num_fires(), 2);
  EXPECT_EQ(out.fires[0].frames, (std::vector<int>{0, 1}));
  EXPECT_EQ(out.fires[1].frames, (std::vector<int>{1, 2}));
  EXPECT_NEAR(out.fires[0].portions[1], 0.3, 1e-12);
  EXPECT_NEAR(out.fires[1].portions[0], 0.3, 1e-12);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(out.c.value().at(0, k), 0.7 * h.at(0, k) + 0.3 * h.at(1, k), 1e-12);
    EXPECT_NEAR(out.c.value().at(1, k), 0.3 * h.at(1, k) + 0.7 * h.at(2, k), 1e-12);
  }
}

TEST(CifFire, TailRuleAndForceNonempty) {
  Tape tape(false);
  const Tensor h({3, 1}, 1.0);
  EXPECT_EQ(cif_fire(tape.constant(h), Weights(tape, {0.6, 0.6, 0.3})).num_fires(), 2);
  EXPECT_EQ(cif_fire(tape.constant(h), Weights(tape, {0.6, 0.6, 0.2})).num_fires(), 1);
  const CifWeights tiny = Weights(tape, {0.1, 0.1, 0.1});
  EXPECT_EQ(cif_fire(tape.constant(h), tiny).num_fires(), 0);
  CifOptions force;
  force.force_nonempty = true;
  const CifOutput forced = cif_fire(tape.constant(h), tiny, force);
  ASSERT_EQ(forced.num_fires(), 1);
  EXPECT_NEAR(forced.c.value().at(0, 0), 0.3, 1e-12);
}

TEST(CifFire, WeightLengthMismatchThrows) {
  Tape tape(false);
  EXPECT_THROW(cif_fire(tape.constant(Tensor({3, 2})), Weights(tape, {0.5, 0.5})),
               DimensionError);
}

TEST(CifFire, ScaledModeFiresExactlyTargetLength) {
  // 200 draws with L ≤ 30 against the closed-form count and unit portions.
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int L = std::uniform_int_distribution<int>(1, 30)(rng);
    const int I = std::uniform_int_distribution<int>(1, L)(rng);
    std::vector<double> a(L);
    for (double& v : a) v = u(rng) + 1e-3;
    Tape tape(false);
    const CifOutput out =
        cif_fire(tape.constant(Random({L, 2}, rng)), scale_weights(Weights(tape, a), I));
    ASSERT_EQ(out.num_fires(), I) << trial;
    for (const FireSpan& f : out.fires) EXPECT_NEAR(f.Total(), 1.0, 1e-9);
  }
}

TEST(CifFire, ConservationSuiteAgainstScalarLoop) {
  const oracle::CifSuiteResult r = oracle::RunCifSuite(1000, 7);
  EXPECT_EQ(r.cases, 1000);
  EXPECT_EQ(r.scaled_count_mismatches, 0);
  EXPECT_LT(r.max_portion_error, 1e-9);
  EXPECT_EQ(r.non_monotone, 0);
  EXPECT_EQ(r.law_mismatches, 0);
  EXPECT_EQ(r.loop_mismatches, 0);
  EXPECT_LT(r.max_loop_portion_diff, 1e-12);
}

TEST(CifFire, SpansAreContiguousAndDistributeEveryFrame) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int L = std::uniform_int_distribution<int>(1, 30)(rng);
    const int I = std::uniform_int_distribution<int>(1, L)(rng);
    std::vector<double> a(L);
    for (double& v : a) v = u(rng) + 1e-3;
    Tape tape(false);
    const CifWeights s = scale_weights(Weights(tape, a), I);
    const CifOutput out = cif_fire(tape.constant(Random({L, 1}, rng)), s);
    std::vector<double> used(L, 0.0);
    int prev_last = 0;
    for (const FireSpan& f : out.fires) {
      ASSERT_FALSE(f.frames.empty());
      EXPECT_TRUE(f.frames.front() == prev_last || f.frames.front() == prev_last + 1);
      for (std::size_t k = 1; k < f.frames.size(); ++k) {
        EXPECT_EQ(f.frames[k], f.frames[k - 1] + 1);
      }
      EXPECT_EQ(f.fire_frame, f.frames.back());
      for (std::size_t k = 0; k < f.frames.size(); ++k) used[f.frames[k]] += f.portions[k];
      prev_last = f.frames.back();
    }
    for (int l = 0; l < L; ++l) EXPECT_NEAR(used[l], s.a.value()[l], 1e-9) << trial;
  }
}

TEST(QuantityLoss, AbsoluteLengthGap) {
  Tape tape(false);
  EXPECT_NEAR(quantity_loss(Weights(tape, {0.8, 0.8}), 2).value()[0], 0.4, 1e-12);
  EXPECT_EQ(quantity_loss(Weights(tape, {0.5, 1.0, 0.5}), 2).value()[0], 0.0);
}

struct SyllableFixture {
  SyllableEncoderConfig config{.num_blocks = 1, .d_model = 8, .num_heads = 2, .d_ffn = 16,
                               .dropout = 0.0};
  ModelParams params;
  SyllableFixture() {
    std::mt19937_64 rng(9);
    InitSyllableEncoderParams(params, config, 6, rng);
  }
};

TEST(SyllableEncode, ShapeDeterminismAndBadIds) {
  SyllableFixture f;
  const std::vector<int> ids = {3, 4, 5, 3, 0, 1, 2};
  Tape t1(false), t2(false);
  ForwardContext c1{t1, f.params}, c2{t2, f.params};
  const Var a = syllable_encode(c1, ids, f.config);
  const Var b = syllable_encode(c2, ids, f.config);
  EXPECT_EQ(a.shape(), (Shape{7, 8}));
  EXPECT_EQ(a.value().storage(), b.value().storage());
  const std::vector<int> bad = {3, 6};
  EXPECT_THROW(syllable_encode(c1, bad, f.config), ContractError);
  EXPECT_THROW(syllable_encode(c1, std::vector<int>{}, f.config), ContractError);
}

TEST(SyllableEncode, GradientMatchesFiniteDifferences) {
  SyllableFixture f;
  std::mt19937_64 rng(10);
  const std::vector<int> ids = {3, 4, 5, 4};
  const Tensor w = Random({4, 8}, rng);
  std::vector<Parameter*> ps;
  for (auto& p : f.params) ps.push_back(p.get());
  GradCheckOptions opt;
  opt.max_entries_per_param = 4;
  opt.rel_floor = 1e-5;
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, f.params};
        return ops::sum(ops::mul(syllable_encode(ctx, ids, f.config), t.constant(w)));
      },
      ps, opt);
  EXPECT_LT(rep.max_rel_error, 1e-4) << rep.worst_param;
}

TEST(MaeLoss, IdentityOffsetAndMismatch) {
  std::mt19937_64 rng(11);
  Tape tape(false);
  const Tensor s = Random({3, 4}, rng);
  Tensor shifted = s;
  for (double& v : shifted.storage()) v += 1.0;
  EXPECT_EQ(mae_loss(tape.constant(s), tape.constant(s)).value()[0], 0.0);
  EXPECT_NEAR(mae_loss(tape.constant(shifted), tape.constant(s)).value()[0], 1.0, 1e-12);
  EXPECT_THROW(mae_loss(tape.constant(Tensor({2, 4})), tape.constant(s)), ContractError);
}

TEST(MaeLoss, RandomPairMatchesElementwiseSum) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor c = Random({5, 3}, rng);
    const Tensor s = Random({5, 3}, rng);
    double ref = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) ref += std::abs(c[i] - s[i]);
    Tape tape(false);
    EXPECT_NEAR(mae_loss(tape.constant(c), tape.constant(s)).value()[0], ref / 15.0, 1e-12);
  }
}

TEST(MaeLoss, EndToEndGradientThroughCifIntoEncoder) {
  const ModelConfig config = oracle::TinyModelConfig();
  ModelParams params = InitModel(config, 13);
  std::mt19937_64 rng(14);
  const Tensor x = Random({24, config.encoder.feat_dim}, rng);
  const int I = 3;
  const Tensor target = Random({I, config.encoder.d_model}, rng);
  std::vector<Parameter*> ps;
  for (auto& p : params) {
    if (HasPrefix(p->name, "encoder.") || HasPrefix(p->name, "cif.")) ps.push_back(p.get());
  }
  GradCheckOptions opt;
  opt.max_entries_per_param = 3;
  opt.rel_floor = 1e-5;
  const auto rep = grad_check(
      [&](Tape& t) {
        ForwardContext ctx{t, params};
        const EncoderOutput enc = encode(ctx, x, -1, config.encoder);
        const CifWeights w = scale_weights(cif_weights(ctx, enc.h, enc.valid_length), I);
        return mae_loss(cif_fire(enc.h, w).c, t.constant(target));
      },
      ps, opt);
  EXPECT_LT(rep.max_rel_error, 1e-3) << rep.worst_param;
}

TEST(FireBoundariesJson, ListsFramesAndPortions) {
  Tape tape(false);
  const CifWeights w = Weights(tape, {0.7, 0.6, 0.7});
  const CifOutput out = cif_fire(tape.constant(Tensor({3, 1}, 1.0)), w);
  const nlohmann::json j = nlohmann::json::parse(FireBoundariesJson(out, w));
  ASSERT_EQ(j.at("fires").size(), 2u);
  EXPECT_EQ(j.at("fires")[0].at("frame"), 1);
  EXPECT_EQ(j.at("fires")[1].at("frames"), (std::vector<int>{1, 2}));
  EXPECT_EQ(j.at("weights").size(), 3u);
}

}  // namespace
}  // namespace cifasr
