#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "icnf/rng.hpp"
#include "icnf/tensor.hpp"

namespace icnf::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

/// Compares the tape gradient of `loss()` w.r.t. `inputs` against central
/// differences (step h) at up to `per_input` random coordinates of each input.
/// Relative error = |a - n| / max(|a|, |n|, floor).
inline GradCheck gradcheck(const std::function<Tensor()>& loss, std::vector<Tensor> inputs, Rng& rng,
                           std::size_t per_input = 8, double h = 1e-5, double floor = 1e-6) {
  for (auto& t : inputs) t.zero_grad();
  backward(loss());
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  GradCheck out;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto values = inputs[k].mutable_values();
    const std::size_t n = values.size();
    std::vector<std::size_t> coords;
    if (n <= per_input) {
      for (std::size_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (std::size_t i = 0; i < per_input; ++i) coords.push_back(rng.next() % n);
    }
    for (std::size_t i : coords) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss().item();
      values[i] = saved - h;
      const double down = loss().item();
      values[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      out.max_rel_error = std::max(out.max_rel_error, rel);
      ++out.probes;
    }
  }
  return out;
}

/// Leaf tensor with uniform(-scale, scale) entries that requires grad.
inline Tensor random_leaf(const Shape& shape, Rng& rng, double scale = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-scale, scale);
  return Tensor(shape, std::move(v), true);
}

}  // namespace icnf::testing
