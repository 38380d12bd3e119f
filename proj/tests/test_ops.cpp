#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aind/errors.hpp"
#include "aind/ops.hpp"
#include "support/gradcheck.hpp"
#include "support/op_gradcheck.hpp"

namespace aind {
namespace {

using testing::op_grad_error;
using testing::op_names;
using testing::Projector;
using testing::grad_check;
using testing::random_tensor;
using testing::random_var;

template <typename T>
Var<T> value(Shape s, std::vector<T> data) {
  return make_var(Tensor<T>(s, std::move(data)));
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a.data()[i]) * b.data()[i];
  return s;
}

TEST(Conv2d, OnesKernelCountsNeighbours) {
  Tape<double> tape(false);
  auto x = constant<double>({1, 3, 3, 1}, 1.0);
  auto w = constant<double>({3, 3, 1, 1}, 1.0);
  auto y = ops::conv2d(tape, x, w, Var<double>{}, 1, 1);
  ASSERT_EQ(y->shape(), (Shape{1, 3, 3, 1}));
  EXPECT_DOUBLE_EQ(y->at(0, 1, 1, 0), 9.0);
  EXPECT_DOUBLE_EQ(y->at(0, 0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(y->at(0, 2, 2, 0), 4.0);
  EXPECT_DOUBLE_EQ(y->at(0, 0, 1, 0), 6.0);
}

TEST(Conv2d, IdentityKernel) {
  Rng rng(3);
  auto x = make_var(random_tensor<double>({2, 5, 4, 3}, rng));
  Tensor<double> k({3, 3, 3, 3});
  for (int c = 0; c < 3; ++c) k.at(1, 1, c, c) = 1.0;
  Tape<double> tape(false);
  auto y = ops::conv2d(tape, x, make_var(k), Var<double>{}, 1, 1);
  ASSERT_EQ(y->shape(), x->shape());
  for (std::size_t i = 0; i < x->size(); ++i) EXPECT_DOUBLE_EQ(y->data()[i], x->data()[i]);
}

TEST(Conv2d, OutputShapeFollowsStrideAndPad) {
  Tape<float> tape(false);
  auto x = constant<float>({2, 9, 7, 2}, 0.5f);
  auto w = constant<float>({3, 3, 2, 5}, 0.1f);
  auto y = ops::conv2d(tape, x, w, Var<float>{}, 2, 1);
  EXPECT_EQ(y->shape(), (Shape{2, 5, 4, 5}));
}

TEST(Conv2d, ChannelMismatchIsConfigError) {
  Tape<float> tape(false);
  auto x = constant<float>({1, 4, 4, 2}, 1.0f);
  auto w = constant<float>({3, 3, 3, 1}, 1.0f);
  EXPECT_THROW(ops::conv2d(tape, x, w, Var<float>{}, 1, 1), ConfigError);
}

TEST(Conv2d, WeightGradOfSumIsInputCorrelationWithOnes) {
  Rng rng(11);
  auto x = make_var(random_tensor<double>({1, 4, 4, 1}, rng));
  auto w = random_var<double>({3, 3, 1, 1}, rng);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::conv2d(tape, x, w, Var<double>{}, 1, 1)));
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      double expect = 0.0;
      for (int y = 0; y < 4; ++y) {
        for (int xx = 0; xx < 4; ++xx) {
          const int iy = y + ky - 1, ix = xx + kx - 1;
          if (iy >= 0 && iy < 4 && ix >= 0 && ix < 4) expect += x->at(0, iy, ix, 0);
        }
      }
      EXPECT_NEAR(w->grad()[static_cast<std::size_t>(ky * 3 + kx)], expect, 1e-12);
    }
  }
}

TEST(TransposedConv2d, SinglePixelSpreadsOverKernel) {
  Tape<double> tape(false);
  auto x = value<double>({1, 1, 1, 1}, {0.7});
  auto w = constant<double>({2, 2, 1, 1}, 1.0);
  auto y = ops::transposed_conv2d(tape, x, w, Var<double>{}, 2);
  ASSERT_EQ(y->shape(), (Shape{1, 2, 2, 1}));
  for (double v : y->data()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(TransposedConv2d, ZeroInputGivesZeroOutput) {
  Rng rng(5);
  Tape<double> tape(false);
  auto x = constant<double>({1, 3, 3, 2}, 0.0);
  auto w = make_var(random_tensor<double>({2, 2, 4, 2}, rng));
  auto y = ops::transposed_conv2d(tape, x, w, Var<double>{}, 2);
  EXPECT_EQ(y->shape(), (Shape{1, 6, 6, 4}));
  for (double v : y->data()) EXPECT_EQ(v, 0.0);
}

TEST(TransposedConv2d, NonPositiveStrideIsConfigError) {
  Tape<double> tape(false);
  auto x = constant<double>({1, 2, 2, 1}, 1.0);
  auto w = constant<double>({2, 2, 1, 1}, 1.0);
  EXPECT_THROW(ops::transposed_conv2d(tape, x, w, Var<double>{}, 0), ConfigError);
  EXPECT_THROW(ops::transposed_conv2d(tape, x, w, Var<double>{}, -2), ConfigError);
}

TEST(TransposedConv2d, IsAdjointOfStridedConv) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const int a = rng.uniform_int(1, 4), b = rng.uniform_int(1, 4);
    const int hh = rng.uniform_int(1, 4), ww = rng.uniform_int(1, 4);
    const Shape xs{2, 2 * hh, 2 * ww, a};
    auto x = make_var(random_tensor<double>(xs, rng));
    auto y = make_var(random_tensor<double>({2, hh, ww, b}, rng));
    auto w = make_var(random_tensor<double>({2, 2, a, b}, rng));
    Tape<double> tape(false);
    const double lhs = dot(*ops::conv2d(tape, x, w, Var<double>{}, 2, 0), *y);
    const double rhs = dot(*x, *ops::transposed_conv2d(tape, y, w, Var<double>{}, 2));
    EXPECT_NEAR(lhs, rhs, 1e-6 * std::max(1.0, std::abs(lhs))) << "seed " << seed;
  }
}

TEST(AvgPool, ConstantStaysConstant) {
  Tape<float> tape(false);
  auto y = ops::avg_pool(tape, constant<float>({1, 8, 8, 2}, 0.3f), 4);
  ASSERT_EQ(y->shape(), (Shape{1, 2, 2, 2}));
  for (float v : y->data()) EXPECT_FLOAT_EQ(v, 0.3f);
}

TEST(AvgPool, BlockMean) {
  std::vector<double> d(16);
  for (int i = 0; i < 16; ++i) d[static_cast<std::size_t>(i)] = i + 1;
  Tape<double> tape(false);
  auto y = ops::avg_pool(tape, value<double>({1, 4, 4, 1}, d), 4);
  ASSERT_EQ(y->size(), 1u);
  EXPECT_DOUBLE_EQ(y->item(), 8.5);
}

TEST(AvgPool, NonDivisibleSizesReplicatePad) {
  Tensor<double> x({1, 5, 5, 1});
  for (int y = 0; y < 5; ++y) {
    for (int xx = 0; xx < 5; ++xx) x.at(0, y, xx, 0) = y * 5 + xx;
  }
  Tape<double> tape(false);
  auto p = ops::avg_pool(tape, make_var(x), 4);
  ASSERT_EQ(p->shape(), (Shape{1, 2, 2, 1}));
  // Bottom-right block is the replicated corner value.
  EXPECT_DOUBLE_EQ(p->at(0, 1, 1, 0), 24.0);
  // Bottom-left block: rows 4,4,4,4 of columns 0..3.
  EXPECT_DOUBLE_EQ(p->at(0, 1, 0, 0), 21.5);
}

TEST(AvgPool, GradientSpreadsEvenly) {
  Rng rng(2);
  auto x = random_var<double>({1, 4, 4, 1}, rng);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::avg_pool(tape, x, 4)));
  for (double g : x->grad()) EXPECT_DOUBLE_EQ(g, 1.0 / 16.0);
}

TEST(AvgPool, UndoesNearestUpsampling) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    const int k = rng.uniform_int(2, 4);
    auto x = make_var(random_tensor<double>({2, rng.uniform_int(1, 5), rng.uniform_int(1, 5), 3}, rng));
    Tape<double> tape(false);
    auto back = ops::avg_pool(tape, ops::upsample_nearest(tape, x, k), k);
    ASSERT_EQ(back->shape(), x->shape());
    for (std::size_t i = 0; i < x->size(); ++i) EXPECT_DOUBLE_EQ(back->data()[i], x->data()[i]);
  }
}

TEST(LeakyRelu, Definition) {
  Tape<double> tape;
  auto x = make_var(Tensor<double>({1, 1, 2, 1}, {2.0, -1.0}), true);
  auto y = ops::leaky_relu(tape, x, 0.2);
  EXPECT_DOUBLE_EQ(y->data()[0], 2.0);
  EXPECT_DOUBLE_EQ(y->data()[1], -0.2);
  tape.backward(ops::sum(tape, y));
  EXPECT_DOUBLE_EQ(x->grad()[0], 1.0);
  EXPECT_DOUBLE_EQ(x->grad()[1], 0.2);
}

TEST(UpsampleLinear, ConstantStaysConstant) {
  Tape<double> tape(false);
  auto y = ops::upsample_linear(tape, constant<double>({1, 3, 2, 2}, 0.4), 4);
  ASSERT_EQ(y->shape(), (Shape{1, 12, 8, 2}));
  for (double v : y->data()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(UpsampleLinear, RampIsMonotone) {
  Tape<double> tape(false);
  auto y = ops::upsample_linear(tape, value<double>({1, 1, 2, 1}, {0.0, 1.0}), 2);
  ASSERT_EQ(y->shape(), (Shape{1, 2, 4, 1}));
  for (int x = 1; x < 4; ++x) EXPECT_LE(y->at(0, 0, x - 1, 0), y->at(0, 0, x, 0));
  // Half-pixel centers: sources at -0.25, 0.25, 0.75, 1.25 clamped to [0, 1].
  EXPECT_DOUBLE_EQ(y->at(0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(y->at(0, 0, 1, 0), 0.25);
  EXPECT_DOUBLE_EQ(y->at(0, 0, 2, 0), 0.75);
  EXPECT_DOUBLE_EQ(y->at(0, 0, 3, 0), 1.0);
}

TEST(Tape, SumOfProductGradient) {
  Rng rng(4);
  auto x = make_var(random_tensor<double>({1, 2, 3, 2}, rng));
  auto w = random_var<double>({1, 2, 3, 2}, rng);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::mul(tape, w, x)));
  for (std::size_t i = 0; i < x->size(); ++i) EXPECT_DOUBLE_EQ(w->grad()[i], x->data()[i]);
}

TEST(Tape, DisconnectedParameterGetsNoGradient) {
  Rng rng(4);
  auto w = random_var<double>({1, 2, 2, 1}, rng);
  auto unused = random_var<double>({1, 2, 2, 1}, rng);
  Tape<double> tape;
  tape.backward(ops::sum(tape, ops::scale(tape, w, 2.0)));
  ASSERT_TRUE(w->has_grad());
  if (unused->has_grad()) {
    for (double g : unused->grad()) EXPECT_EQ(g, 0.0);
  }
}

TEST(Tape, BackwardErrors) {
  Rng rng(4);
  auto w = random_var<double>({1, 2, 2, 1}, rng);
  {
    Tape<double> tape;
    EXPECT_THROW(tape.backward(ops::sum(tape, constant<double>({1, 2, 2, 1}, 1.0))), StateError);
  }
  {
    Tape<double> tape;
    auto y = ops::scale(tape, w, 2.0);
    EXPECT_THROW(tape.backward(y), ShapeError);
  }
  {
    Tape<double> tape;
    auto loss = ops::sum(tape, w);
    tape.backward(loss);
    EXPECT_THROW(tape.backward(loss), StateError);
    tape.reset();
    w->clear_grad();
    auto again = ops::sum(tape, w);
    EXPECT_NO_THROW(tape.backward(again));
  }
}

TEST(Tape, ReplaysInReverseOrder) {
  std::vector<int> order;
  Tape<double> tape;
  tape.record([&] { order.push_back(1); });
  tape.record([&] { order.push_back(2); });
  tape.record([&] { order.push_back(3); });
  tape.backward(constant<double>(scalar_shape(), 0.0));
  EXPECT_EQ(order, (std::vector<int>{3, 2, 1}));
}

TEST(Ops, ForwardIsDeterministicAndFinite) {
  Rng rng(9);
  auto x = make_var(random_tensor<float>({2, 8, 8, 3}, rng));
  auto w = make_var(random_tensor<float>({3, 3, 3, 4}, rng));
  auto run = [&] {
    Tape<float> tape(false);
    auto h = ops::conv2d(tape, x, w, Var<float>{}, 1, 1);
    h = ops::instance_norm(tape, h, 1e-5f);
    h = ops::leaky_relu(tape, h, 0.2f);
    h = ops::avg_pool(tape, h, 2);
    return ops::upsample_linear(tape, ops::softplus(tape, h), 2);
  };
  auto a = run();
  auto b = run();
  for (std::size_t i = 0; i < a->size(); ++i) {
    EXPECT_EQ(a->data()[i], b->data()[i]);
    EXPECT_TRUE(std::isfinite(a->data()[i]));
  }
}

TEST(Ops, ShapeMismatchesThrow) {
  Tape<float> tape(false);
  auto a = constant<float>({1, 2, 2, 1}, 1.0f);
  auto b = constant<float>({1, 2, 3, 1}, 1.0f);
  EXPECT_THROW(ops::add(tape, a, b), ShapeError);
  EXPECT_THROW(ops::mean_abs_error(tape, a, b), ShapeError);
  EXPECT_THROW(ops::concat_channels(tape, a, b), ShapeError);
}

class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, MatchesCentralDifferencesAtDouble) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LE(op_grad_error<double>(GetParam(), seed, 1e-5), 1e-4) << "seed " << seed;
  }
}

TEST_P(OpGradient, MatchesCentralDifferencesAtSingle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EXPECT_LE(op_grad_error<float>(GetParam(), seed, 1e-2), 1e-2) << "seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_names()),
                         [](const ::testing::TestParamInfo<std::string>& info) { return info.param; });

}  // namespace
}  // namespace aind
