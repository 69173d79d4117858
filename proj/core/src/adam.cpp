#include "icnf/adam.hpp"

#include <cmath>

#include "icnf/error.hpp"

namespace icnf {

AdamState make_adam_state(const ParamStore& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const auto& [name, t] : params) {
    if (!t.requires_grad()) continue;
    state.m.emplace_back(t.size(), 0.0);
    state.v.emplace_back(t.size(), 0.0);
  }
  return state;
}

void adam_step(ParamStore& params, AdamState& state) {
  if (state.m.size() != params.trainable_count()) {
    throw Error("adam_step: state tracks " + std::to_string(state.m.size()) +
                " parameters, store has " + std::to_string(params.trainable_count()));
  }
  for (const auto& [name, t] : params) {
    if (t.requires_grad() && !t.has_grad()) {
      throw Error("adam_step: missing gradient for parameter '" + name + "'");
    }
  }

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double step = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(c.beta1, step);
  const double correction2 = 1.0 - std::pow(c.beta2, step);

  std::size_t slot = 0;
  for (auto& [name, t] : params) {
    if (!t.requires_grad()) continue;
    auto value = t.mutable_values();
    auto grad = t.grad();
    auto& m = state.m[slot];
    auto& v = state.v[slot];
    if (m.size() != value.size()) {
      throw Error("adam_step: moment shape mismatch for '" + name + "'");
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      value[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
    ++slot;
  }
}

}  // namespace icnf
