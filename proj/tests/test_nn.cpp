// Copyright 2026 The pedcross Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "pedcross/nn/autodiff.hpp"
#include "pedcross/nn/checkpoint.hpp"
#include "pedcross/nn/grad_check.hpp"
#include "pedcross/nn/layers.hpp"
#include "pedcross/nn/ops.hpp"
#include "pedcross/nn/optim.hpp"
#include "pedcross/nn/tensor.hpp"

namespace pedcross::nn {
namespace {

Tensor RandomTensor(Shape shape, Xorshift64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.Uniform(lo, hi);
  return t;
}

// Plain nested-loop zero-padded cross-correlation.
Tensor NaiveConv(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t s) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const std::size_t f = w.dim(0), k = w.dim(2);
  const std::size_t oh = (h + s - 1) / s, ow = (wd + s - 1) / s;
  const long pad = static_cast<long>((k - 1) / 2);
  Tensor out({n, f, oh, ow});
  for (std::size_t in = 0; in < n; ++in)
    for (std::size_t of = 0; of < f; ++of)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = b[of];
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t di = 0; di < k; ++di)
              for (std::size_t dj = 0; dj < k; ++dj) {
                const long r = static_cast<long>(i * s + di) - pad;
                const long q = static_cast<long>(j * s + dj) - pad;
                if (r < 0 || q < 0 || r >= long(h) || q >= long(wd)) continue;
                acc += x.at(in, ic, r, q) * w.at(of, ic, di, dj);
              }
          out[((in * f + of) * oh + i) * ow + j] = acc;
        }
  return out;
}

double Sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

TEST(Tensor, RejectsZeroExtentAndCountMismatch) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t[5], 1.5);
}

TEST(Conv2D, ScalingKernel) {
  Tape tape;
  Var x = tape.Constant(Tensor({1, 1, 3, 3}, 1.0));
  Var w = tape.Constant(Tensor({1, 1, 1, 1}, 2.0));
  Var b = tape.Constant(Tensor({1}));
  const Tensor y = Conv2D(x, w, b, 1).value();
  ASSERT_EQ(y.shape(), (Shape{1, 1, 3, 3}));
  for (double v : y.values()) EXPECT_EQ(v, 2.0);
}

TEST(Conv2D, StridedOnesKernelMatchesHandSum) {
  Tensor xin({1, 1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) xin[i] = double(i + 1);
  Tape tape;
  const Tensor y = Conv2D(tape.Constant(xin), tape.Constant(Tensor({1, 1, 3, 3}, 1.0)),
                          tape.Constant(Tensor({1})), 2)
                       .value();
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  // Windows start at -1 and 1: {1,2,5,6}, {2,3,4,6,7,8}, {5,6,9,10,13,14},
  // {6,7,8,10,11,12,14,15,16}.
  EXPECT_EQ(y[0], 14.0);
  EXPECT_EQ(y[1], 30.0);
  EXPECT_EQ(y[2], 57.0);
  EXPECT_EQ(y[3], 99.0);
  const Tensor oracle = NaiveConv(xin, Tensor({1, 1, 3, 3}, 1.0), Tensor({1}), 2);
  EXPECT_EQ(y.values()[0], oracle[0]);
  EXPECT_EQ(y.values()[3], oracle[3]);
}

TEST(Conv2D, MatchesNaiveOracleOnRandomConfigs) {
  Xorshift64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng.Below(2), c = 1 + rng.Below(3), f = 1 + rng.Below(3);
    const std::size_t h = 1 + rng.Below(9), w = 1 + rng.Below(9);
    const std::size_t k = 1 + 2 * rng.Below(3), s = 1 + rng.Below(3);
    const Tensor x = RandomTensor({n, c, h, w}, rng);
    const Tensor wt = RandomTensor({f, c, k, k}, rng);
    const Tensor b = RandomTensor({f}, rng);
    Tape tape;
    const Tensor y =
        Conv2D(tape.Constant(x), tape.Constant(wt), tape.Constant(b), s).value();
    const Tensor o = NaiveConv(x, wt, b, s);
    ASSERT_EQ(y.shape(), o.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], o[i], 1e-12);
  }
}

TEST(Conv2D, SameExtentIsCeilDivisionSweep) {
  for (std::size_t in = 1; in <= 64; ++in)
    for (std::size_t s = 1; s <= 4; ++s)
      EXPECT_EQ(SameExtent(in, s), (in + s - 1) / s) << in << "/" << s;
  Xorshift64 rng(3);
  for (std::size_t in = 1; in <= 12; ++in)
    for (std::size_t s = 1; s <= 4; ++s) {
      Tape tape;
      const Tensor y = Conv2D(tape.Constant(RandomTensor({1, 1, in, in + 1}, rng)),
                              tape.Constant(RandomTensor({1, 1, 3, 3}, rng)),
                              tape.Constant(Tensor({1})), s)
                           .value();
      EXPECT_EQ(y.dim(2), (in + s - 1) / s);
      EXPECT_EQ(y.dim(3), (in + s) / s);
    }
}

TEST(Conv2D, StrideScheduleFrom300) {
  std::size_t side = 300;
  std::vector<std::size_t> seen;
  for (std::size_t s : {3, 2, 2}) seen.push_back(side = SameExtent(side, s));
  EXPECT_EQ(seen, (std::vector<std::size_t>{100, 50, 25}));
}

TEST(Conv2D, ShapeMismatchNamesDimensions) {
  Tape tape;
  try {
    Conv2D(tape.Constant(Tensor({1, 2, 4, 4})), tape.Constant(Tensor({1, 3, 3, 3})),
           tape.Constant(Tensor({1})), 1);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("[1,2,4,4]"), std::string::npos) << e.what();
  }
}

TEST(Lstm, ZeroWeightsHalveCell) {
  Xorshift64 rng(0);
  LstmLayer lstm("l", 2, 3, rng);
  lstm.input_weight.value.Fill(0.0);
  lstm.recurrent_weight.value.Fill(0.0);
  lstm.bias.value.Fill(0.0);
  Tape tape;
  Tensor c0({1, 3}, std::vector<double>{0.4, -1.0, 2.0});
  auto st = lstm.Step(tape, tape.Constant(Tensor({1, 2}, 0.7)),
                      {tape.Constant(Tensor({1, 3})), tape.Constant(c0)});
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_DOUBLE_EQ(st.c.value()[j], 0.5 * c0[j]);
    EXPECT_DOUBLE_EQ(st.h.value()[j], 0.5 * std::tanh(0.5 * c0[j]));
  }
}

TEST(Lstm, LargeForgetBiasKeepsMemory) {
  Xorshift64 rng(0);
  LstmLayer lstm("l", 1, 2, rng);
  lstm.input_weight.value.Fill(0.0);
  lstm.recurrent_weight.value.Fill(0.0);
  lstm.bias.value.Fill(0.0);
  for (std::size_t j = 2; j < 4; ++j) lstm.bias.value[j] = 100.0;
  Tape tape;
  Tensor c0({1, 2}, std::vector<double>{1.25, -0.5});
  auto st = lstm.Step(tape, tape.Constant(Tensor({1, 1}, 3.0)),
                      {tape.Constant(Tensor({1, 2})), tape.Constant(c0)});
  EXPECT_NEAR(st.c.value()[0], 1.25, 1e-12);
  EXPECT_NEAR(st.c.value()[1], -0.5, 1e-12);
}

TEST(Lstm, SingleUnitScalarOracle) {
  Xorshift64 rng(0);
  LstmLayer lstm("l", 1, 1, rng);
  const double wi = 0.3, wf = -0.2, wg = 0.8, wo = 0.5;
  const double ui = 0.1, uf = 0.4, ug = -0.6, uo = 0.2;
  const double bi = 0.05, bf = 1.0, bg = -0.1, bo = 0.3;
  lstm.input_weight.value = Tensor({1, 4}, std::vector<double>{wi, wf, wg, wo});
  lstm.recurrent_weight.value = Tensor({1, 4}, std::vector<double>{ui, uf, ug, uo});
  lstm.bias.value = Tensor({4}, std::vector<double>{bi, bf, bg, bo});
  const double x = 0.9, h0 = -0.3, c0 = 0.7;
  Tape tape;
  auto st = lstm.Step(tape, tape.Constant(Tensor({1, 1}, x)),
                      {tape.Constant(Tensor({1, 1}, h0)), tape.Constant(Tensor({1, 1}, c0))});
  const double i = Sigm(wi * x + ui * h0 + bi);
  const double f = Sigm(wf * x + uf * h0 + bf);
  const double g = std::tanh(wg * x + ug * h0 + bg);
  const double o = Sigm(wo * x + uo * h0 + bo);
  const double c = f * c0 + i * g;
  EXPECT_NEAR(st.c.value()[0], c, 1e-15);
  EXPECT_NEAR(st.h.value()[0], o * std::tanh(c), 1e-15);
}

TEST(Lstm, ForgetBiasInitialisedToOne) {
  Xorshift64 rng(5);
  LstmLayer lstm("l", 3, 4, rng);
  for (std::size_t j = 0; j < 16; ++j)
    EXPECT_EQ(lstm.bias.value[j], (j >= 4 && j < 8) ? 1.0 : 0.0);
}

TEST(GlobalAvgPool, Examples) {
  Tape tape;
  EXPECT_DOUBLE_EQ(
      GlobalAvgPool(tape.Constant(Tensor({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4})))
          .value()[0],
      2.5);
  const Tensor y = GlobalAvgPool(tape.Constant(Tensor({1, 2, 3, 3}, 4.0))).value();
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(y[1], 4.0);
  Xorshift64 rng(1);
  const Tensor x = RandomTensor({2, 3, 1, 1}, rng);
  const Tensor z = GlobalAvgPool(tape.Constant(x)).value();
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(z[i], x[i]);
}

TEST(Dense, IdentityWeightsPassThrough) {
  Xorshift64 rng(2);
  DenseLayer d("d", 3, 3, rng);
  d.weight.value = Tensor({3, 3});
  for (std::size_t i = 0; i < 3; ++i) d.weight.value[i * 3 + i] = 1.0;
  const Tensor x = RandomTensor({4, 3}, rng);
  Tape tape;
  const Tensor y = d(tape, tape.Constant(x)).value();
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Dropout, EvalAndZeroRateAreIdentity) {
  Xorshift64 rng(3);
  const Tensor x = RandomTensor({5, 7}, rng);
  Tape tape;
  Var v = tape.Constant(x);
  EXPECT_EQ(Dropout(v, 0.5, Mode::kEval, rng).value().values()[3], x[3]);
  const Tensor y = Dropout(v, 0.0, Mode::kTrain, rng).value();
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
  EXPECT_THROW(Dropout(v, 1.0, Mode::kTrain, rng), ConfigError);
}

TEST(Dropout, InvertedScalingPreservesExpectation) {
  Xorshift64 rng(4);
  const Tensor x = RandomTensor({1, 8}, rng, 0.5, 1.5);
  double eval_mean = 0.0;
  for (double v : x.values()) eval_mean += v;
  eval_mean /= 8.0;
  double train_sum = 0.0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    Tape tape;
    for (double v : Dropout(tape.Constant(x), 0.5, Mode::kTrain, rng).value().values())
      train_sum += v;
  }
  const double train_mean = train_sum / (8.0 * trials);
  EXPECT_LT(std::abs(train_mean - eval_mean) / eval_mean, 0.02);
}

TEST(WeightedBce, Examples) {
  std::vector<double> p = {0.5};
  std::vector<int> y = {1};
  EXPECT_NEAR(WeightedBceValue(p, y, 2.0, 1.0), 2.0 * std::log(2.0), 1e-15);
  p = {1.0, 0.0};
  y = {1, 0};
  const double floor = -std::log(1.0 - kProbabilityClamp);
  EXPECT_NEAR(WeightedBceValue(p, y, 1.0, 1.0), floor, 1e-18);
  EXPECT_NEAR(floor, 1e-7, 1e-13);
  p = {1.0};
  y = {1};
  EXPECT_NEAR(WeightedBceValue(p, y, 3.0, 1.0), 3.0 * floor, 1e-18);
}

TEST(WeightedBce, PositiveAwayFromSaturation) {
  Xorshift64 rng(6);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> p(5);
    std::vector<int> y(5);
    for (int i = 0; i < 5; ++i) {
      p[i] = rng.Uniform(1e-6, 1.0 - 1e-6);
      y[i] = rng.Bernoulli(0.5);
    }
    EXPECT_GT(WeightedBceValue(p, y, rng.Uniform(0.1, 3), rng.Uniform(0.1, 3)), 0.0);
  }
}

TEST(WeightedBce, GradientZeroWhereClamped) {
  Parameter p("p", Tensor({2}, std::vector<double>{1e-9, 0.3}));
  Tape tape;
  tape.Backward(WeightedBce(tape.Param(p), {1, 1}, 1.0, 1.0));
  EXPECT_EQ(p.grad[0], 0.0);
  EXPECT_NEAR(p.grad[1], -0.5 / 0.3, 1e-12);
}

TEST(Backward, BeforeForwardIsStateError) {
  Tape tape;
  EXPECT_THROW(tape.Backward(Var{}), StateError);
}

TEST(Backward, AffineSumGradientClosedForm) {
  Xorshift64 rng(7);
  DenseLayer d("d", 3, 2, rng);
  const Tensor x = RandomTensor({4, 3}, rng);
  Tape tape;
  tape.Backward(Sum(d(tape, tape.Constant(x))));
  // d/dW_ij sum(xW+b) = sum_n x_ni; d/db_j = N.
  for (std::size_t i = 0; i < 3; ++i) {
    double col = 0.0;
    for (std::size_t n = 0; n < 4; ++n) col += x[n * 3 + i];
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(d.weight.grad[i * 2 + j], col, 1e-14);
  }
  EXPECT_EQ(d.bias.grad[0], 4.0);
  EXPECT_EQ(d.bias.grad[1], 4.0);
}

TEST(Backward, UnusedParameterGetsExactZero) {
  Xorshift64 rng(8);
  DenseLayer used("u", 2, 2, rng), unused("v", 2, 2, rng);
  unused.weight.grad.Fill(0.0);
  Tape tape;
  tape.Backward(Sum(used(tape, tape.Constant(RandomTensor({3, 2}, rng)))));
  for (double g : unused.weight.grad.values()) EXPECT_EQ(g, 0.0);
  for (double g : unused.bias.grad.values()) EXPECT_EQ(g, 0.0);
}

TEST(RmsProp, WorkedExamples) {
  Parameter p("p", Tensor({1}));
  p.grad[0] = 1.0;
  RmsPropOptions opt{0.1, 0.9, 1e-7};
  RmsPropStep(std::vector<Parameter*>{&p}, opt);
  EXPECT_NEAR(p.cache[0], 0.1, 1e-15);
  EXPECT_NEAR(p.value[0], -0.1 / (std::sqrt(0.1) + 1e-7), 1e-15);
  EXPECT_NEAR(p.value[0], -0.316228, 1e-6);
  RmsPropStep(std::vector<Parameter*>{&p}, opt);
  EXPECT_NEAR(p.cache[0], 0.19, 1e-15);

  Parameter q("q", Tensor({1}, 2.0));
  q.cache[0] = 0.5;
  RmsPropStep(std::vector<Parameter*>{&q}, opt);
  EXPECT_EQ(q.value[0], 2.0);
  EXPECT_NEAR(q.cache[0], 0.45, 1e-15);
}

TEST(RmsProp, CacheStaysNonNegative) {
  Xorshift64 rng(9);
  Parameter p("p", RandomTensor({16}, rng));
  for (int step = 0; step < 100; ++step) {
    for (double& g : p.grad.values()) g = rng.Gaussian(0, 3);
    RmsPropStep(std::vector<Parameter*>{&p}, RmsPropOptions{});
    for (double c : p.cache.values()) ASSERT_GE(c, 0.0);
  }
}

// ---- finite-difference checks per layer kind ------------------------------

double CheckWithProjection(const std::function<Var(Tape&)>& build,
                           std::vector<Parameter*> params, Xorshift64& rng,
                           const Shape& out_shape) {
  const Tensor proj = RandomTensor(out_shape, rng);
  auto loss = [&](Tape& tape) { return Sum(Mul(build(tape), tape.Constant(proj))); };
  return GradCheck(loss, params).max_relative_error;
}

TEST(GradCheck, Conv2DTwentyConfigs) {
  Xorshift64 rng(100);
  for (int t = 0; t < 20; ++t) {
    const std::size_t c = 1 + rng.Below(3), f = 1 + rng.Below(3);
    const std::size_t h = 2 + rng.Below(6), k = 1 + 2 * rng.Below(2), s = 1 + rng.Below(3);
    Parameter x("x", RandomTensor({2, c, h, h}, rng));
    Conv2DLayer conv("c", c, f, k, s, rng);
    const std::size_t o = SameExtent(h, s);
    const double err = CheckWithProjection(
        [&](Tape& tape) { return conv(tape, tape.Param(x)); },
        {&x, &conv.weight, &conv.bias}, rng, {2, f, o, o});
    EXPECT_LT(err, 1e-4) << "config " << t;
  }
}

TEST(GradCheck, LstmTwentyConfigs) {
  Xorshift64 rng(200);
  for (int t = 0; t < 20; ++t) {
    const std::size_t d = 1 + rng.Below(3), u = 1 + rng.Below(4), steps = 1 + rng.Below(4);
    std::vector<Parameter> xs;
    for (std::size_t s = 0; s < steps; ++s)
      xs.emplace_back("x" + std::to_string(s), RandomTensor({2, d}, rng));
    LstmLayer lstm("l", d, u, rng);
    std::vector<Parameter*> params = lstm.parameters();
    for (auto& x : xs) params.push_back(&x);
    const double err = CheckWithProjection(
        [&](Tape& tape) {
          std::vector<Var> in;
          for (auto& x : xs) in.push_back(tape.Param(x));
          return lstm.Run(tape, in);
        },
        params, rng, {2, u});
    EXPECT_LT(err, 1e-4) << "config " << t;
  }
}

TEST(GradCheck, DenseTwentyConfigs) {
  Xorshift64 rng(300);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(5), u = 1 + rng.Below(5);
    Parameter x("x", RandomTensor({n, d}, rng));
    DenseLayer dense("d", d, u, rng);
    const double err = CheckWithProjection(
        [&](Tape& tape) { return dense(tape, tape.Param(x)); },
        {&x, &dense.weight, &dense.bias}, rng, {n, u});
    EXPECT_LT(err, 1e-4) << "config " << t;
  }
}

TEST(GradCheck, DropoutFixedMaskTwentyConfigs) {
  Xorshift64 rng(400);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(6);
    const double p = rng.Uniform(0.0, 0.9);
    Parameter x("x", RandomTensor({n, d}, rng));
    const std::uint64_t mask_seed = rng();
    const double err = CheckWithProjection(
        [&](Tape& tape) {
          Xorshift64 mask_rng(mask_seed);
          return Dropout(tape.Param(x), p, Mode::kTrain, mask_rng);
        },
        {&x}, rng, {n, d});
    EXPECT_LT(err, 1e-4) << "config " << t;
  }
}

TEST(GradCheck, GlobalAvgPoolTwentyConfigs) {
  Xorshift64 rng(500);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.Below(3), c = 1 + rng.Below(4);
    const std::size_t h = 1 + rng.Below(5), w = 1 + rng.Below(5);
    Parameter x("x", RandomTensor({n, c, h, w}, rng));
    const double err = CheckWithProjection(
        [&](Tape& tape) { return GlobalAvgPool(tape.Param(x)); }, {&x}, rng, {n, c});
    EXPECT_LT(err, 1e-4) << "config " << t;
  }
}

TEST(GradCheck, ActivationsTwentyConfigs) {
  Xorshift64 rng(600);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.Below(4), d = 1 + rng.Below(6);
    Parameter x("x", RandomTensor({n, d}, rng, -3.0, 3.0));
    // Keep ReLU inputs off the kink.
    for (double& v : x.value.values())
      if (std::abs(v) < 1e-3) v = 0.5;
    for (int which = 0; which < 3; ++which) {
      const double err = CheckWithProjection(
          [&](Tape& tape) {
            Var v = tape.Param(x);
            return which == 0 ? Relu(v) : which == 1 ? Sigmoid(v) : Tanh(v);
          },
          {&x}, rng, {n, d});
      EXPECT_LT(err, 1e-4) << "config " << t << " activation " << which;
    }
  }
}

TEST(GradCheck, WeightedBceAndConcat) {
  Xorshift64 rng(700);
  for (int t = 0; t < 20; ++t) {
    Parameter a("a", RandomTensor({3, 2}, rng)), b("b", RandomTensor({3, 1}, rng));
    DenseLayer head("h", 3, 1, rng);
    std::vector<int> y = {1, 0, 1};
    auto loss = [&](Tape& tape) {
      Var z = ConcatCols({tape.Param(a), tape.Param(b)});
      return WeightedBce(Reshape(Sigmoid(head(tape, z)), {3}), y, 1.7, 0.6);
    };
    std::vector<Parameter*> ps = {&a, &b, &head.weight, &head.bias};
    EXPECT_LT(GradCheck(loss, ps).max_relative_error, 1e-4);
  }
}

TEST(GradCheck, WorkedTolerances) {
  Xorshift64 rng(800);
  {
    Parameter x("x", RandomTensor({4, 5}, rng));
    DenseLayer d("d", 5, 3, rng);
    EXPECT_LT(CheckWithProjection([&](Tape& tape) { return d(tape, tape.Param(x)); },
                                  {&x, &d.weight, &d.bias}, rng, {4, 3}),
              1e-6);
  }
  {
    Parameter x("x", RandomTensor({1, 2, 8, 8}, rng));
    Conv2DLayer c1("c1", 2, 3, 3, 1, rng), c2("c2", 3, 4, 3, 2, rng), c3("c3", 4, 2, 3, 2, rng);
    EXPECT_LT(CheckWithProjection(
                  [&](Tape& tape) {
                    return c3(tape, Tanh(c2(tape, Tanh(c1(tape, tape.Param(x))))));
                  },
                  {&x, &c1.weight, &c1.bias, &c2.weight, &c2.bias, &c3.weight, &c3.bias},
                  rng, {1, 2, 2, 2}),
              1e-5);
  }
  {
    std::vector<Parameter> xs;
    for (int s = 0; s < 5; ++s) xs.emplace_back("x", RandomTensor({2, 3}, rng));
    LstmLayer lstm("l", 3, 4, rng);
    EXPECT_LT(CheckWithProjection(
                  [&](Tape& tape) {
                    std::vector<Var> in;
                    for (auto& x : xs) in.push_back(tape.Param(x));
                    return lstm.Run(tape, in);
                  },
                  lstm.parameters(), rng, {2, 4}),
              1e-5);
  }
}

TEST(Checkpoint, BitExactRoundTrip) {
  Xorshift64 rng(900);
  Conv2DLayer conv("c", 2, 3, 3, 2, rng);
  LstmLayer lstm("l", 2, 3, rng);
  std::vector<Parameter*> params = conv.parameters();
  for (auto* p : lstm.parameters()) params.push_back(p);
  for (auto* p : params)
    for (double& v : p->value.values()) v = rng.Gaussian(0, 1e3) * 1e-7 + v;
  std::vector<LayerSpec> specs(2);
  specs[0].kind = LayerKind::kConv2D;
  specs[0].name = "c";
  specs[1].kind = LayerKind::kLstm;
  specs[1].name = "l";
  const auto path = std::filesystem::temp_directory_path() / "pedcross_ckpt_test.bin";
  SaveCheckpoint(path, specs, params);

  Xorshift64 other(1);
  Conv2DLayer conv2("c", 2, 3, 3, 2, other);
  LstmLayer lstm2("l", 2, 3, other);
  std::vector<Parameter*> params2 = conv2.parameters();
  for (auto* p : lstm2.parameters()) params2.push_back(p);
  const auto header = LoadCheckpoint(path, params2);
  EXPECT_EQ(header["layers"].size(), 2u);
  for (std::size_t i = 0; i < params.size(); ++i)
    for (std::size_t j = 0; j < params[i]->value.size(); ++j)
      ASSERT_EQ(std::bit_cast<std::uint64_t>(params[i]->value[j]),
                std::bit_cast<std::uint64_t>(params2[i]->value[j]));

  Conv2DLayer wrong("c", 2, 4, 3, 2, other);
  auto wp = wrong.parameters();
  EXPECT_THROW(LoadCheckpoint(path, wp), LoadError);
  EXPECT_THROW(LoadCheckpoint("/nonexistent/ckpt.bin", params2), LoadError);
  std::filesystem::remove(path);
}


TEST(GradCheck, StepShrinksWhenStencilCrossesReluKink) {
  // 3e-6 from the kink: a 1e-5 central difference straddles it (slope 0.65).
  Parameter x("x", Tensor({1}, 3e-6));
  auto loss = [&](Tape& tape) { return Sum(Relu(tape.Param(x))); };
  std::vector<Parameter*> ps = {&x};
  const auto r = GradCheck(loss, ps);
  EXPECT_LT(r.max_relative_error, 1e-9);
  EXPECT_EQ(r.entries_refined, 1u);
  EXPECT_EQ(r.entries_on_kink, 0u);

  GradCheckOptions no_refine;
  no_refine.min_step = no_refine.step;
  const auto raw = GradCheck(loss, ps, no_refine);
  EXPECT_NEAR(raw.max_relative_error, 0.35, 1e-6);
  EXPECT_EQ(raw.entries_on_kink, 1u);
}

}  // namespace
}  // namespace pedcross::nn
