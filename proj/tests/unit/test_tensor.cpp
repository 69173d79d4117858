#include <gtest/gtest.h>

#include "icnf/error.hpp"
#include "icnf/ops.hpp"
#include "icnf/tensor.hpp"

using namespace icnf;

TEST(Tensor, ShapeAndValues) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_DOUBLE_EQ(t.values()[4], 5.0);
  EXPECT_THROW(t.dim(2), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(t.item(), ShapeError);
  EXPECT_DOUBLE_EQ(Tensor::scalar(2.5).item(), 2.5);
}

TEST(Tensor, BackwardAccumulatesIntoLeaves) {
  Tensor x({3}, {1, 2, 3}, true);
  backward(sum(mul(x, x)));
  ASSERT_TRUE(x.has_grad());
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
  EXPECT_DOUBLE_EQ(x.grad()[2], 6.0);
  // fresh graph, same leaf: gradients accumulate until cleared
  backward(sum(x));
  EXPECT_DOUBLE_EQ(x.grad()[0], 3.0);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Tensor, ReusedNodeGetsSummedGradient) {
  Tensor x({1}, {3.0}, true);
  const Tensor y = mul(x, x);
  backward(sum(add(y, y)));  // d/dx 2x^2 = 4x
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Tensor, SecondBackwardThrows) {
  Tensor x({2}, {1, 2}, true);
  const Tensor loss = sum(mul(x, x));
  backward(loss);
  EXPECT_THROW(backward(loss), GraphError);
}

TEST(Tensor, DetachedLossThrows) {
  Tensor x({2}, {1, 2});
  EXPECT_THROW(backward(sum(x)), GraphError);
  Tensor y({2}, {1, 2}, true);
  EXPECT_THROW(backward(sum(y.detach())), GraphError);
}

TEST(Tensor, NonScalarLossThrows) {
  Tensor x({2}, {1, 2}, true);
  EXPECT_THROW(backward(mul(x, x)), GraphError);
}

TEST(Tensor, NoGradGuardSkipsTape) {
  Tensor x({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    const Tensor y = mul(x, x);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
  EXPECT_TRUE(mul(x, x).requires_grad());
}

TEST(Tensor, OpOutputsAreImmutable) {
  Tensor x({2}, {1, 2}, true);
  Tensor y = scale(x, 2.0);
  EXPECT_FALSE(y.is_leaf());
  EXPECT_THROW(y.mutable_values(), GraphError);
  EXPECT_NO_THROW(x.mutable_values());
}

TEST(Tensor, UntouchedLeafGetsZeroGradient) {
  Tensor x({2}, {1, 2}, true);
  Tensor unused({2}, {1, 2}, true);
  const Tensor both = add(x, mul(unused, Tensor::zeros({2})));
  backward(sum(both));
  ASSERT_TRUE(unused.has_grad());
  EXPECT_DOUBLE_EQ(unused.grad()[0], 0.0);
}

TEST(Tensor, LongChainDestructsWithoutOverflow) {
  Tensor x({1}, {1.0}, true);
  Tensor y = x;
  for (int i = 0; i < 200000; ++i) y = scale(y, 1.0);
  backward(sum(y));
  EXPECT_DOUBLE_EQ(x.grad()[0], 1.0);
}
