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
#include <cstring>
#include <random>

#include <gtest/gtest.h>

#include "cifasr/autodiff.h"
#include "cifasr/errors.h"
#include "cifasr/gradcheck.h"
#include "cifasr/ops.h"
#include "cifasr/optim.h"
#include "cifasr/params.h"
#include "cifasr/tensor.h"

namespace cifasr {
namespace {

void ExpectTensorNear(const Tensor& got, const Tensor& want, double tol) {
  ASSERT_EQ(got.shape(), want.shape());
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], tol) << "at " << i;
}

Parameter Param(std::string name, Tensor value, bool trainable = true) {
  return Parameter{std::move(name), std::move(value), {}, trainable};
}

Tensor Random(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (double& x : t.storage()) x = n(rng);
  return t;
}

TEST(Tensor, ShapeAndDataAgree) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2);
  EXPECT_EQ(t.cols(), 3);
  EXPECT_THROW(Tensor({2, 0}), DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW(t.Reshaped({4}), DimensionError);
  EXPECT_EQ(t.Reshaped({3, 2}).shape(), (Shape{3, 2}));
}

TEST(Matmul, IdentityCases) {
  Tape tape;
  const Var a = tape.constant(Tensor::Matrix({{1, 2}, {3, 4}}));
  const Var id = tape.constant(Tensor::Matrix({{1, 0}, {0, 1}}));
  ExpectTensorNear(ops::matmul(a, id).value(), Tensor::Matrix({{1, 2}, {3, 4}}), 0.0);
  const Var b = tape.constant(Tensor::Matrix({{5}, {7}}));
  ExpectTensorNear(ops::matmul(id, b).value(), Tensor::Matrix({{5}, {7}}), 0.0);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Tape tape;
  const Var a = tape.constant(Tensor({2, 3}));
  const Var b = tape.constant(Tensor({2, 3}));
  EXPECT_THROW(ops::matmul(a, b), DimensionError);
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(7);
  Parameter a = Param("a", Random({3, 4}, rng));
  Parameter b = Param("b", Random({4, 2}, rng));
  const auto rep = grad_check(
      [&](Tape& t) { return ops::sum(ops::gelu(ops::matmul(t.param(a), t.param(b)))); }, {&a, &b});
  EXPECT_LT(rep.max_rel_error, 1e-6) << rep.worst_param;
}

TEST(Softmax, UniformAndStable) {
  Tape tape;
  ExpectTensorNear(ops::softmax(tape.constant(Tensor::Vector({0, 0, 0}))).value(),
                   Tensor::Vector({1.0 / 3, 1.0 / 3, 1.0 / 3}), 1e-15);
  const Tensor big = ops::softmax(tape.constant(Tensor::Vector({1000, 0}))).value();
  EXPECT_TRUE(big.AllFinite());
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);
}

TEST(Softmax, RowsSumToOne) {
  std::mt19937_64 rng(3);
  Tape tape;
  const Tensor s = ops::softmax(tape.constant(Random({4, 6}, rng))).value();
  for (int r = 0; r < 4; ++r) EXPECT_NEAR(s.mat().row(r).sum(), 1.0, 1e-12);
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Parameter x = Param("x", Random({5}, rng));
  Tensor w = Random({5}, rng);
  const auto rep = grad_check(
      [&](Tape& t) { return ops::sum(ops::mul(ops::softmax(t.param(x)), t.constant(w))); }, {&x});
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(LayerNorm, ConstantRowAndNormalizedRow) {
  Tape tape;
  const Var g = tape.constant(Tensor::Vector({1, 1, 1, 1}));
  const Var b = tape.constant(Tensor::Vector({0, 0, 0, 0}));
  ExpectTensorNear(ops::layer_norm(tape.constant(Tensor::Matrix({{5, 5, 5, 5}})), g, b).value(),
                   Tensor::Matrix({{0, 0, 0, 0}}), 0.0);
  const Var g2 = tape.constant(Tensor::Vector({1, 1}));
  const Var b2 = tape.constant(Tensor::Vector({0, 0}));
  const Tensor y = ops::layer_norm(tape.constant(Tensor::Matrix({{1, -1}})), g2, b2).value();
  // Variance 1, so only eps moves the result.
  EXPECT_NEAR(y[0], 1.0 / std::sqrt(1.0 + 1e-5), 1e-15);
  EXPECT_NEAR(y[1], -1.0 / std::sqrt(1.0 + 1e-5), 1e-15);
}

TEST(LayerNorm, WidthMismatchThrows) {
  Tape tape;
  EXPECT_THROW(ops::layer_norm(tape.constant(Tensor({2, 3})), tape.constant(Tensor({4})),
                               tape.constant(Tensor({4}))),
               DimensionError);
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  Parameter x = Param("x", Random({2, 8}, rng));
  Parameter g = Param("g", Random({8}, rng));
  Parameter b = Param("b", Random({8}, rng));
  Tensor w = Random({2, 8}, rng);
  const auto rep = grad_check(
      [&](Tape& t) {
        return ops::sum(
            ops::mul(ops::layer_norm(t.param(x), t.param(g), t.param(b)), t.constant(w)));
      },
      {&x, &g, &b});
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(Conv1d, WidthOneIdentityKernel) {
  std::mt19937_64 rng(1);
  Tape tape;
  const Tensor x = Random({6, 3}, rng);
  Tensor k({1, 3, 3});
  for (int i = 0; i < 3; ++i) k[static_cast<std::size_t>(i * 3 + i)] = 1.0;
  ExpectTensorNear(ops::conv1d(tape.constant(x), tape.constant(k), 1, 0).value(), x, 0.0);
}

TEST(Conv1d, StrideTwoShapeArithmetic) {
  EXPECT_EQ(ops::conv1d_output_length(32, 3, 2, 1), 16);
  EXPECT_EQ(ops::conv1d_output_length(16, 3, 2, 1), 8);
  Tape tape;
  const Var x = tape.constant(Tensor({32, 2}, 1.0));
  const Var k = tape.constant(Tensor({3, 2, 2}, 0.1));
  const Var y = ops::conv1d(ops::conv1d(x, k, 2, 1), k, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{8, 2}));
}

TEST(Conv1d, TooShortInputThrows) {
  Tape tape;
  EXPECT_THROW(ops::conv1d(tape.constant(Tensor({2, 1})), tape.constant(Tensor({5, 1, 1})), 1, 0),
               InputTooShortError);
}

TEST(Conv1d, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(9);
  Parameter x = Param("x", Random({7, 2}, rng));
  Parameter k = Param("k", Random({3, 2, 3}, rng));
  Tensor w = Random({7, 3}, rng);
  const auto rep = grad_check(
      [&](Tape& t) {
        return ops::sum(ops::mul(ops::conv1d(t.param(x), t.param(k), 1, 1), t.constant(w)));
      },
      {&x, &k});
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(Backward, SumOfParameterGivesOnes) {
  Parameter p = Param("p", Tensor::Vector({0.5, -1.0, 2.0}));
  Tape tape;
  tape.backward(ops::sum(tape.param(p)));
  ExpectTensorNear(p.grad, Tensor::Vector({1, 1, 1}), 0.0);
}

TEST(Backward, GradientsAccumulateAcrossCalls) {
  Parameter p = Param("p", Tensor::Vector({1.0, 2.0}));
  {
    Tape tape;
    tape.backward(ops::sum(tape.param(p)));
  }
  {
    Tape tape;
    const Var v = tape.param(p);
    tape.backward(ops::sum(ops::mul(v, v)));
  }
  ExpectTensorNear(p.grad, Tensor::Vector({1 + 2.0, 1 + 4.0}), 1e-15);
}

TEST(Backward, NonScalarLossThrows) {
  Parameter p = Param("p", Tensor::Vector({1.0, 2.0}));
  Tape tape;
  EXPECT_THROW(tape.backward(tape.param(p)), ContractError);
}

TEST(Backward, FrozenParameterGetsNoGradient) {
  Parameter p = Param("p", Tensor::Vector({1.0, 2.0}), false);
  Parameter q = Param("q", Tensor::Vector({3.0, 4.0}));
  Tape tape;
  tape.backward(ops::sum(ops::mul(tape.param(p), tape.param(q))));
  EXPECT_FALSE(p.has_grad());
  ExpectTensorNear(q.grad, Tensor::Vector({1, 2}), 0.0);
}

TEST(Backward, FanOutAccumulatesBothConsumers) {
  std::mt19937_64 rng(2);
  Parameter x = Param("x", Random({4}, rng));
  const auto rep = grad_check(
      [&](Tape& t) {
        const Var v = t.param(x);
        return ops::sum(ops::add(ops::sigmoid(v), ops::mul(v, ops::gelu(v))));
      },
      {&x});
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

TEST(Backward, NoGradTapeRecordsConstants) {
  Parameter p = Param("p", Tensor::Vector({1.0}));
  Tape tape(false);
  const Var v = tape.param(p);
  EXPECT_FALSE(v.requires_grad());
}

ModelParams TwoParams() {
  ModelParams params;
  params.Add("a", Tensor::Vector({1.0, 2.0}));
  params.Add("b", Tensor::Vector({-1.0}));
  return params;
}

TEST(ClipGradNorm, BelowThresholdUnchanged) {
  ModelParams params = TwoParams();
  params.Get("a").grad = Tensor::Vector({0.0, 3.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(params, 5.0), 3.0);
  ExpectTensorNear(params.Get("a").grad, Tensor::Vector({0, 3}), 0.0);
}

TEST(ClipGradNorm, ThreeFourFive) {
  ModelParams params;
  params.Add("g", Tensor::Vector({0, 0}));
  params.Get("g").grad = Tensor::Vector({3.0, 4.0});
  EXPECT_DOUBLE_EQ(clip_grad_norm(params, 1.0), 5.0);
  ExpectTensorNear(params.Get("g").grad, Tensor::Vector({0.6, 0.8}), 1e-15);
}

TEST(ClipGradNorm, RandomGradsEndBelowMaxAndClipIsIdempotent) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    ModelParams params;
    params.Add("x", Tensor({3, 3}));
    params.Add("y", Tensor({5}));
    for (auto& p : params) p->grad = Random(p->value.shape(), rng);
    const double max_norm = std::uniform_real_distribution<double>(0.1, 4.0)(rng);
    clip_grad_norm(params, max_norm);
    EXPECT_LE(global_grad_norm(params), max_norm + 1e-9);
    const Tensor once = params.Get("x").grad;
    clip_grad_norm(params, max_norm);
    ExpectTensorNear(params.Get("x").grad, once, 1e-15);
  }
}

TEST(NoamSchedule, WarmupThenInverseSqrt) {
  AdamConfig c{.base_lr = 2.0, .warmup_steps = 100, .d_model = 256};
  EXPECT_NEAR(NoamLearningRate(c, 1), 2.0 / 16.0 * 1.0 * std::pow(100.0, -1.5), 1e-15);
  EXPECT_NEAR(NoamLearningRate(c, 100), 2.0 / 16.0 / 10.0, 1e-15);
  EXPECT_NEAR(NoamLearningRate(c, 400), 2.0 / 16.0 / 20.0, 1e-15);
  EXPECT_LT(NoamLearningRate(c, 50), NoamLearningRate(c, 100));
  EXPECT_GT(NoamLearningRate(c, 100), NoamLearningRate(c, 101));
}

TEST(Adam, ZeroGradsLeaveParametersUnchanged) {
  ModelParams params = TwoParams();
  for (auto& p : params) p->grad = Tensor::ZerosLike(p->value);
  AdamState state(AdamConfig{});
  adam_step(params, state);
  ExpectTensorNear(params.Get("a").value, Tensor::Vector({1, 2}), 0.0);
  EXPECT_EQ(state.step(), 1);
}

TEST(Adam, FrozenParameterIsBitIdenticalAndHasNoMoments) {
  ModelParams params = TwoParams();
  params.Get("b").trainable = false;
  const Tensor before = params.Get("b").value;
  for (auto& p : params) p->grad = Tensor(p->value.shape(), 1.0);
  AdamState state(AdamConfig{});
  adam_step(params, state);
  EXPECT_EQ(std::memcmp(before.data(), params.Get("b").value.data(), sizeof(double)), 0);
  EXPECT_FALSE(state.HasMoments("b"));
  EXPECT_TRUE(state.HasMoments("a"));
  EXPECT_FALSE(params.Get("a").has_grad());
}

TEST(Adam, TwoStepsMatchHandIteratedRecurrence) {
  const AdamConfig c{.base_lr = 1.0, .warmup_steps = 10, .d_model = 4};
  ModelParams params;
  params.Add("w", Tensor::Vector({0.5}));
  AdamState state(c);
  double w = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 2; ++t) {
    params.Get("w").grad = Tensor::Vector({1.0});
    adam_step(params, state);
    const double lr = 0.5 * std::min(1.0 / std::sqrt(t), t * std::pow(10.0, -1.5));
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    const double mhat = m / (1 - std::pow(0.9, t));
    const double vhat = v / (1 - std::pow(0.999, t));
    w -= lr * mhat / (std::sqrt(vhat) + 1e-9);
    EXPECT_NEAR(params.Get("w").value[0], w, 1e-15) << "step " << t;
  }
  EXPECT_EQ(state.step(), 2);
}

TEST(GradCheck, SquareAtThree) {
  Parameter x = Param("x", Tensor::Vector({3.0}));
  const auto rep = grad_check(
      [&](Tape& t) {
        const Var v = t.param(x);
        return ops::sum(ops::mul(v, v));
      },
      {&x});
  EXPECT_NEAR(rep.worst_analytic, 6.0, 1e-12);
  EXPECT_NEAR(rep.worst_numeric, 6.0, 1e-8);
  EXPECT_LT(rep.max_rel_error, 1e-8);
}

TEST(GradCheck, SoftmaxCrossEntropy) {
  std::mt19937_64 rng(8);
  Parameter z = Param("z", Random({3, 5}, rng));
  const std::vector<int> y = {1, 4, 0};
  const auto rep = grad_check(
      [&](Tape& t) { return ops::label_smoothed_cross_entropy(t.param(z), y, 0.0); }, {&z});
  EXPECT_LT(rep.max_rel_error, 1e-6);
}

}  // namespace
}  // namespace cifasr
