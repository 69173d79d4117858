#pragma once

#include <cstdint>
#include <vector>

#include "icnf/params.hpp"

namespace icnf {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Moment buffers for one ParamStore, indexed like its trainable entries.
struct AdamState {
  AdamConfig config;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(const ParamStore& params, AdamConfig config = {});

/// Bias-corrected Adam update using each trainable parameter's gradient.
/// Throws Error if any trainable parameter has no recorded gradient.
void adam_step(ParamStore& params, AdamState& state);

}  // namespace icnf
