#include <gtest/gtest.h>

#include <cmath>

#include "icnf/adam.hpp"
#include "icnf/error.hpp"
#include "icnf/ops.hpp"

using namespace icnf;

TEST(Adam, FirstStepMovesByLearningRate) {
  // bias-corrected first step is lr * g / (|g| + eps') ~= lr * sign(g)
  ParamStore p;
  p.add("x", Tensor({2}, {1.0, -2.0}, true));
  auto state = make_adam_state(p, AdamConfig{0.1, 0.9, 0.999, 1e-8});
  backward(sum(mul(p.at("x"), Tensor({2}, {3.0, -0.5}))));
  adam_step(p, state);
  EXPECT_NEAR(p.at("x").values()[0], 0.9, 1e-8);
  EXPECT_NEAR(p.at("x").values()[1], -1.9, 1e-8);
  EXPECT_EQ(state.step_count, 1u);
}

TEST(Adam, MinimisesQuadratic) {
  ParamStore p;
  p.add("x", Tensor({3}, {4.0, -3.0, 1.0}, true));
  auto state = make_adam_state(p, AdamConfig{0.05});
  for (int i = 0; i < 2000; ++i) {
    p.zero_grad();
    backward(sum(mul(p.at("x"), p.at("x"))));
    adam_step(p, state);
  }
  for (double v : p.at("x").values()) EXPECT_LT(std::abs(v), 1e-2);
}

TEST(Adam, MetaEntriesUntouched) {
  ParamStore p;
  p.add("x", Tensor({1}, {1.0}, true));
  p.set_meta("hidden", 8);
  auto state = make_adam_state(p);
  backward(sum(p.at("x")));
  adam_step(p, state);
  EXPECT_DOUBLE_EQ(p.meta("hidden"), 8.0);
}

TEST(Adam, MissingGradientNamesParameter) {
  ParamStore p;
  p.add("x", Tensor({1}, {1.0}, true));
  p.add("unused", Tensor({1}, {1.0}, true));
  auto state = make_adam_state(p);
  backward(sum(p.at("x")));
  try {
    adam_step(p, state);
    FAIL() << "expected throw";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'unused'"), std::string::npos);
  }
}
