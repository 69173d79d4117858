#include <gtest/gtest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "icnf/error.hpp"
#include "icnf/ops.hpp"

using namespace icnf;
using icnf::testing::gradcheck;
using icnf::testing::random_leaf;

namespace {

void expect_grad_ok(const std::function<Tensor()>& loss, std::vector<Tensor> inputs, std::uint64_t seed) {
  Rng rng(seed);
  const auto result = gradcheck(loss, std::move(inputs), rng);
  EXPECT_LT(result.max_rel_error, 1e-4) << "over " << result.probes << " probes";
}

}  // namespace

TEST(Ops, MatmulValues) {
  const Tensor a({2, 2}, {1, 2, 3, 4});
  const Tensor b({2, 1}, {5, 6});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c.values()[0], 17.0);
  EXPECT_DOUBLE_EQ(c.values()[1], 39.0);
  EXPECT_THROW(matmul(a, Tensor({3, 1}, {1, 2, 3})), ShapeError);
}

TEST(Ops, BroadcastAddEitherOrder) {
  const Tensor x({2, 2}, {1, 2, 3, 4});
  const Tensor bias({2}, {10, 20});
  const auto y = add(x, bias);
  const auto z = add(bias, x);
  EXPECT_DOUBLE_EQ(y.values()[3], 24.0);
  EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()),
            std::vector<double>(z.values().begin(), z.values().end()));
  EXPECT_THROW(add(x, Tensor({3}, {1, 2, 3})), ShapeError);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  Rng rng(1);
  const Tensor x = random_leaf({3, 5}, rng, 30.0);
  const Tensor p = softmax(x, 1);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) s += p.values()[r * 5 + c];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Ops, SigmoidIsStableForLargeInputs) {
  const Tensor s = sigmoid(Tensor({2}, {-800.0, 800.0}));
  EXPECT_EQ(s.values()[0], 0.0);
  EXPECT_EQ(s.values()[1], 1.0);
}

TEST(Ops, BceWithLogitsMatchesFormula) {
  const Tensor z({2}, {0.3, -1000.0});
  const Tensor y({2}, {1.0, 0.0});
  const double expected = (std::log1p(std::exp(-0.3)) + 0.0) / 2.0;
  EXPECT_NEAR(bce_with_logits(z, y).item(), expected, 1e-15);
}

TEST(Ops, LayerNormZeroMeanUnitVariance) {
  const Tensor x({1, 4}, {1, 2, 3, 4});
  const Tensor y = layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4}), 0.0);
  double mean = 0.0, var = 0.0;
  for (double v : y.values()) mean += v / 4.0;
  for (double v : y.values()) var += (v - mean) * (v - mean) / 4.0;
  EXPECT_NEAR(mean, 0.0, 1e-15);
  EXPECT_NEAR(var, 1.0, 1e-12);
}

TEST(Ops, GeluKnownValue) {
  // tanh approximation at x = 1
  const double expected = 0.5 * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (1.0 + 0.044715)));
  EXPECT_NEAR(gelu(Tensor({1}, {1.0})).item(), expected, 1e-15);
}

TEST(Ops, SliceConcatTransposeReshape) {
  const Tensor x({2, 3}, {0, 1, 2, 3, 4, 5});
  const Tensor s = slice(x, 1, 1, 2);
  EXPECT_EQ(s.shape(), (Shape{2, 2}));
  EXPECT_DOUBLE_EQ(s.values()[2], 4.0);
  const Tensor c = concat({slice(x, 1, 0, 1), slice(x, 1, 1, 2)}, 1);
  EXPECT_EQ(std::vector<double>(c.values().begin(), c.values().end()),
            std::vector<double>(x.values().begin(), x.values().end()));
  const Tensor t = transpose(x, 0, 1);
  EXPECT_EQ(t.shape(), (Shape{3, 2}));
  EXPECT_DOUBLE_EQ(t.values()[1], 3.0);
  EXPECT_THROW(reshape(x, {4}), ShapeError);
  EXPECT_THROW(slice(x, 1, 2, 2), ShapeError);
}

TEST(Ops, EmbeddingGathersRows) {
  const Tensor table({3, 2}, {0, 1, 10, 11, 20, 21});
  const std::vector<std::size_t> idx{2, 0};
  const Tensor e = embedding(table, idx);
  EXPECT_DOUBLE_EQ(e.values()[0], 20.0);
  EXPECT_DOUBLE_EQ(e.values()[3], 1.0);
  const std::vector<std::size_t> bad{3};
  EXPECT_THROW(embedding(table, bad), ShapeError);
}

// ---- gradient checks: one per primitive ------------------------------------

TEST(OpsGrad, Matmul2D) {
  Rng rng(2);
  auto a = random_leaf({3, 4}, rng), b = random_leaf({4, 2}, rng);
  expect_grad_ok([&] { return sum(mul(matmul(a, b), matmul(a, b))); }, {a, b}, 3);
}

TEST(OpsGrad, MatmulBatched) {
  Rng rng(4);
  auto a = random_leaf({2, 3, 4}, rng), b = random_leaf({2, 4, 2}, rng), w = random_leaf({4, 3}, rng);
  expect_grad_ok([&] { return sum(mul(matmul(a, b), matmul(a, b))); }, {a, b}, 5);
  expect_grad_ok([&] { return sum(tanh(matmul(a, w))); }, {a, w}, 6);
}

TEST(OpsGrad, AddSubMulBroadcast) {
  Rng rng(7);
  auto x = random_leaf({2, 3}, rng), b = random_leaf({3}, rng);
  expect_grad_ok([&] { return sum(mul(add(x, b), sub(b, x))); }, {x, b}, 8);
  expect_grad_ok([&] { return sum(mul(mul(x, b), x)); }, {x, b}, 9);
}

TEST(OpsGrad, ScaleSigmoidTanhGelu) {
  Rng rng(10);
  auto x = random_leaf({5}, rng, 2.0);
  expect_grad_ok([&] { return sum(mul(sigmoid(scale(x, 1.7)), x)); }, {x}, 11);
  expect_grad_ok([&] { return sum(mul(tanh(x), x)); }, {x}, 12);
  expect_grad_ok([&] { return sum(mul(gelu(x), x)); }, {x}, 13);
}

TEST(OpsGrad, SoftmaxBothAxes) {
  Rng rng(14);
  auto x = random_leaf({3, 4}, rng, 2.0), w = random_leaf({3, 4}, rng);
  expect_grad_ok([&] { return sum(mul(softmax(x, -1), w)); }, {x}, 15);
  expect_grad_ok([&] { return sum(mul(softmax(x, 0), w)); }, {x}, 16);
}

TEST(OpsGrad, LayerNorm) {
  Rng rng(17);
  auto x = random_leaf({3, 5}, rng), g = random_leaf({5}, rng), b = random_leaf({5}, rng), w = random_leaf({3, 5}, rng);
  expect_grad_ok([&] { return sum(mul(layer_norm(x, g, b), w)); }, {x, g, b}, 18);
}

TEST(OpsGrad, MseAndBce) {
  Rng rng(19);
  auto p = random_leaf({4, 2}, rng), t = random_leaf({4, 2}, rng);
  expect_grad_ok([&] { return mse(p, t); }, {p, t}, 20);
  auto z = random_leaf({6}, rng, 3.0);
  const Tensor y({6}, {0, 1, 1, 0, 1, 0});
  expect_grad_ok([&] { return bce_with_logits(z, y); }, {z}, 21);
}

TEST(OpsGrad, StructuralOps) {
  Rng rng(22);
  auto x = random_leaf({2, 3, 4}, rng), w = random_leaf({4, 2, 3}, rng), wt = random_leaf({4, 3, 2}, rng);
  expect_grad_ok([&] { return sum(mul(transpose(x, 0, 2), wt)); }, {x}, 23);
  expect_grad_ok([&] { return sum(mul(reshape(x, {4, 2, 3}), w)); }, {x}, 24);
  expect_grad_ok([&] { return sum(mul(slice(x, 2, 1, 2), slice(x, 2, 1, 2))); }, {x}, 25);
  expect_grad_ok([&] { return sum(mul(concat({x, scale(x, 2.0)}, 1), concat({x, x}, 1))); }, {x}, 26);
}

TEST(OpsGrad, EmbeddingRepeatedIndices) {
  Rng rng(27);
  auto table = random_leaf({4, 3}, rng);
  const std::vector<std::size_t> idx{1, 3, 1};
  auto w = random_leaf({3, 3}, rng);
  expect_grad_ok([&] { return sum(mul(embedding(table, idx), w)); }, {table}, 28);
}
