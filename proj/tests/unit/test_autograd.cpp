#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "spikecast/errors.hpp"
#include "spikecast/grad_check.hpp"
#include "spikecast/ops.hpp"
#include "spikecast/spiking.hpp"
#include "spikecast/tensor.hpp"

using namespace spikecast;

namespace {

TensorD random_tensor(std::mt19937_64& rng, Shape shape, bool grad = true) {
  const auto n = shape_numel(shape);
  return TensorD(std::move(shape), oracle::uniform(rng, n, -2.0, 2.0), grad);
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<float>(5)), DimensionError);
  Tensor t({2, 3});
  EXPECT_EQ(t.numel(), 6u);
}

TEST(Ops, MatmulIdentity) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 3}, {1, 2, 3, 4, 5, 6});
  auto out = matmul(eye, m);
  ASSERT_EQ(out.shape(), m.shape());
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(out[i], m[i]);
}

TEST(Ops, SigmoidAtZero) { EXPECT_FLOAT_EQ(sigmoid(Tensor({1}, {0.f}))[0], 0.5f); }

TEST(Ops, SoftmaxUniform) {
  auto s = softmax(Tensor({1, 3}, {0.7f, 0.7f, 0.7f}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(s[i], 1.0 / 3, 1e-7);
}

TEST(Ops, SoftmaxIsShiftStable) {
  auto s = softmax(TensorD({1, 2}, {1000.0, 1001.0}));
  EXPECT_NEAR(s[1], oracle::sigmoid(1.0), 1e-12);
}

TEST(Ops, ShapeErrorNamesOpAndShapes) {
  try {
    add(Tensor({2}), Tensor({3}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos);
    EXPECT_NE(msg.find("[2]"), std::string::npos);
    EXPECT_NE(msg.find("[3]"), std::string::npos);
  }
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), DimensionError);
}

TEST(Ops, RecordsOnlyWhenAnInputNeedsGrad) {
  Tensor a({2}, {1, 2}), b({2}, {3, 4}, true);
  EXPECT_TRUE(add(a, a).is_leaf());
  EXPECT_FALSE(add(a, b).is_leaf());
  NoGradGuard guard;
  EXPECT_TRUE(add(a, b).is_leaf());
}

TEST(Ops, GatherAndMaskedFill) {
  Tensor x({3, 2}, {1, 2, 3, 4, 5, 6});
  auto g = gather_rows(x, {2, 0});
  EXPECT_EQ(g.shape(), (Shape{2, 2}));
  EXPECT_EQ(g[0], 5);
  EXPECT_EQ(g[3], 2);
  auto m = masked_fill(x, {0, 1, 0, 0, 0, 1}, -9.f);
  EXPECT_EQ(m[1], -9.f);
  EXPECT_EQ(m[5], -9.f);
  EXPECT_EQ(m[2], 3.f);
}

TEST(Backward, SumGivesOnes) {
  Tensor x({3}, {1, 2, 3}, true);
  sum(x).backward();
  for (float g : x.grad()) EXPECT_EQ(g, 1.f);
}

TEST(Backward, SquareMatchesFiniteDifference) {
  TensorD x({2}, {1.0, 2.0}, true);
  sum(mul(x, x)).backward();
  auto fd = oracle::central_difference(
      [](const oracle::Vec& v) { return v[0] * v[0] + v[1] * v[1]; }, {1.0, 2.0}, 1e-3);
  EXPECT_NEAR(x.grad()[0], fd[0], 1e-9);
  EXPECT_NEAR(x.grad()[1], fd[1], 1e-9);
  EXPECT_NEAR(x.grad()[1], 4.0, 1e-12);
}

TEST(Backward, SigmoidSlopeAtZero) {
  Tensor x({1}, {0.f}, true);
  sum(sigmoid(x)).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 0.25f);
}

TEST(Backward, FanOutAccumulates) {
  Tensor x({2}, {0.3f, -1.f}, true);
  auto y = add(x, x);
  sum(scale(y, 3.f)).backward();
  EXPECT_EQ(x.grad()[0], 6.f);
  EXPECT_EQ(x.grad()[1], 6.f);
}

TEST(Backward, LeafGradsAccumulateUntilZeroed) {
  Tensor x({1}, {2.f}, true);
  sum(x).backward();
  sum(x).backward();
  EXPECT_EQ(x.grad()[0], 2.f);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, NonScalarLossRejected) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(mul(x, x).backward(), ContractError);
}

TEST(Backward, EveryReachableLeafGetsGrad) {
  Tensor a({2}, {1, 2}, true), b({2}, {3, 4}, true), c({2}, {5, 6}, false);
  sum(mul(add(a, c), b)).backward();
  EXPECT_TRUE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(c.has_grad());
}

TEST(Backward, DeepChainDoesNotOverflowStack) {
  Tensor x({1}, {1.f}, true);
  auto y = x;
  for (int i = 0; i < 200000; ++i) y = add_scalar(y, 0.f);
  sum(y).backward();
  EXPECT_EQ(x.grad()[0], 1.f);
}

TEST(GradCheck, TanhOfProduct) {
  std::mt19937_64 rng(7);
  auto w = random_tensor(rng, {4, 3}, false);
  auto x = random_tensor(rng, {5, 4});
  auto report = grad_check<double>([&](const TensorD& v) { return sum(tanh(matmul(v, w))); }, x, 1e-3, 1e-4);
  EXPECT_TRUE(report.passed) << report.max_relative_error;
  EXPECT_LT(report.max_relative_error, 1e-4);
}

TEST(GradCheck, SumIsExact) {
  TensorD x({3}, {0.1, -0.4, 1.5}, true);
  auto report = grad_check<double>([](const TensorD& v) { return sum(v); }, x, 1e-3, 1e-12);
  EXPECT_LT(report.max_relative_error, 1e-10);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheck, RejectsSurrogate) {
  TensorD x({3}, {0.1, -0.4, 1.5}, true);
  EXPECT_THROW(grad_check<double>([](const TensorD& v) { return sum(heaviside(v, 2.0)); }, x, 1e-3, 1e-4),
               ContractError);
}

// Every smooth op, random inputs in [-2, 2], h = 1e-3.
TEST(GradCheck, EverySmoothOp) {
  std::mt19937_64 rng(11);
  const double tol = 1e-4, h = 1e-3;
  auto b = random_tensor(rng, {3, 4}, false);
  auto bias = random_tensor(rng, {4}, false);
  auto other = random_tensor(rng, {3, 4}, false);
  std::vector<std::pair<const char*, std::function<TensorD(const TensorD&)>>> cases = {
      {"matmul", [&](const TensorD& v) { return sum(tanh(matmul(v, transpose(b)))); }},
      {"bmm", [&](const TensorD& v) {
         auto a = reshape(v, {1, 3, 4});
         return sum(tanh(bmm(a, reshape(other, {1, 3, 4}), true)));
       }},
      {"add", [&](const TensorD& v) { return sum(mul(add(v, other), v)); }},
      {"sub", [&](const TensorD& v) { return sum(mul(sub(v, other), v)); }},
      {"mul", [&](const TensorD& v) { return sum(mul(mul(v, other), v)); }},
      {"scale", [&](const TensorD& v) { return sum(mul(scale(v, 1.7), v)); }},
      {"add_scalar", [&](const TensorD& v) { return sum(mul(add_scalar(v, 0.3), v)); }},
      {"add_bias", [&](const TensorD& v) { return sum(tanh(add_bias(v, bias))); }},
      {"sigmoid", [&](const TensorD& v) { return sum(mul(sigmoid(v), other)); }},
      {"tanh", [&](const TensorD& v) { return sum(mul(tanh(v), other)); }},
      {"exp", [&](const TensorD& v) { return sum(mul(exp(scale(v, 0.5)), other)); }},
      {"log", [&](const TensorD& v) { return sum(mul(log(add_scalar(mul(v, v), 1.0)), other)); }},
      {"softmax", [&](const TensorD& v) { return sum(mul(softmax(v), other)); }},
      {"concat_last", [&](const TensorD& v) { return sum(tanh(concat_last<double>({v, mul(v, v)}))); }},
      {"concat_rows", [&](const TensorD& v) { return sum(tanh(concat_rows<double>({v, mul(v, other)}))); }},
      {"slice_last", [&](const TensorD& v) { return sum(mul(slice_last(v, 1, 3), slice_last(v, 2, 4))); }},
      {"slice_rows", [&](const TensorD& v) { return sum(mul(slice_rows(v, 1, 3), slice_rows(v, 0, 2))); }},
      {"clamp", [&](const TensorD& v) { return sum(mul(clamp(v, -0.35, 0.4), other)); }},
      {"swap_axes", [&](const TensorD& v) { return sum(tanh(matmul(swap_axes(v, 0, 1), other))); }},
      {"mean", [&](const TensorD& v) { return mean(mul(v, v)); }},
      {"gather_rows", [&](const TensorD& v) { return sum(mul(gather_rows(v, {2, 0, 2}), other)); }},
      {"index_sum_rows",
       [&](const TensorD& v) { return sum(tanh(index_sum_rows(v, {0, 2, 2, 3}, {1, 2, 0}))); }},
      {"masked_fill",
       [&](const TensorD& v) {
         return sum(mul(masked_fill(v, {1, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0}, 0.5), other));
       }},
      {"repeat_frames", [&](const TensorD& v) { return sum(tanh(repeat_frames(v, 2))); }},
      {"mean_groups", [&](const TensorD& v) { return sum(tanh(mean_groups(reshape(v, {6, 2}), 3))); }},
      {"mse_loss", [&](const TensorD& v) { return mse_loss(v, other); }},
  };
  for (const auto& [name, f] : cases) {
    auto x = random_tensor(rng, {3, 4});
    auto report = grad_check<double>(f, x, h, tol);
    EXPECT_TRUE(report.passed) << name << " rel err " << report.max_relative_error;
  }
}

TEST(Determinism, IdenticalInputsGiveBitIdenticalGradients) {
  auto run = [] {
    std::mt19937_64 rng(3);
    Tensor w({4, 4}, [&] {
      std::vector<float> v(16);
      std::uniform_real_distribution<float> d(-1, 1);
      for (auto& x : v) x = d(rng);
      return v;
    }(), true);
    Tensor x({2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
    auto y = softmax(tanh(matmul(x, w)));
    sum(mul(y, y)).backward();
    return std::make_pair(std::vector<float>(y.data().begin(), y.data().end()),
                          std::vector<float>(w.grad().begin(), w.grad().end()));
  };
  EXPECT_EQ(run(), run());
}
