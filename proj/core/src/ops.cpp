#include "icnf/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "icnf/error.hpp"

namespace icnf {

namespace {

using detail::Node;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatMap = Eigen::Map<const RowMat>;
using MatMap = Eigen::Map<RowMat>;

[[noreturn]] void shape_fail(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

std::string two(const Tensor& a, const Tensor& b) {
  return shape_string(a.shape()) + " vs " + shape_string(b.shape());
}

template <class Backward>
Tensor record(const char* op, Shape shape, std::vector<double> value,
              std::initializer_list<const Tensor*> inputs, Backward&& bw) {
  auto node = std::make_shared<Node>();
  node->op = op;
  node->leaf = false;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs = false;
  if (grad_enabled()) {
    for (const Tensor* in : inputs) needs = needs || in->requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const Tensor* in : inputs) node->inputs.push_back(in->node());
    node->backward = std::forward<Backward>(bw);
  }
  return Tensor::from_node(std::move(node));
}

bool wants_grad(const Node& self, std::size_t i) { return self.inputs[i]->requires_grad; }

std::span<double> grad_of(Node& self, std::size_t i) { return self.inputs[i]->ensure_grad(); }

bool is_suffix(const Shape& small, const Shape& big) {
  return small.size() <= big.size() && std::equal(small.begin(), small.end(),
                                                   big.end() - static_cast<long>(small.size()));
}

std::size_t normalize_axis(const char* op, int axis, std::size_t rank) {
  const long r = static_cast<long>(rank);
  const long a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    shape_fail(op, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return static_cast<std::size_t>(a);
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_at(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

enum class Binary { kAdd, kSub, kMul };

Tensor binary(const char* op, Binary kind, const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  bool a_small = false;
  bool b_small = false;
  if (sa != sb) {
    if (is_suffix(sb, sa)) {
      b_small = true;
    } else if (is_suffix(sa, sb)) {
      a_small = true;
    } else {
      shape_fail(op, "cannot broadcast " + two(a, b));
    }
  }
  const Shape out_shape = a_small ? sb : sa;
  const std::size_t n = shape_size(out_shape);
  const std::size_t inner = a_small ? a.size() : (b_small ? b.size() : n);
  const std::size_t outer = inner == 0 ? 0 : n / inner;
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(n);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t j = 0; j < inner; ++j) {
      const std::size_t idx = o * inner + j;
      const double x = av[a_small ? j : idx];
      const double y = bv[b_small ? j : idx];
      out[idx] = kind == Binary::kAdd ? x + y : kind == Binary::kSub ? x - y : x * y;
    }
  }
  return record(op, out_shape, std::move(out), {&a, &b},
                [kind, a_small, b_small, outer, inner](Node& self) {
                  const auto& g = self.grad;
                  const auto& av = self.inputs[0]->value;
                  const auto& bv = self.inputs[1]->value;
                  if (wants_grad(self, 0)) {
                    auto ga = grad_of(self, 0);
                    for (std::size_t o = 0; o < outer; ++o) {
                      for (std::size_t j = 0; j < inner; ++j) {
                        const std::size_t idx = o * inner + j;
                        const double d = kind == Binary::kMul ? g[idx] * bv[b_small ? j : idx] : g[idx];
                        ga[a_small ? j : idx] += d;
                      }
                    }
                  }
                  if (wants_grad(self, 1)) {
                    auto gb = grad_of(self, 1);
                    for (std::size_t o = 0; o < outer; ++o) {
                      for (std::size_t j = 0; j < inner; ++j) {
                        const std::size_t idx = o * inner + j;
                        double d = g[idx];
                        if (kind == Binary::kSub) d = -d;
                        if (kind == Binary::kMul) d *= av[a_small ? j : idx];
                        gb[b_small ? j : idx] += d;
                      }
                    }
                  }
                });
}

template <class Fn, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fn fn, Deriv deriv) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fn(xv[i]);
  return record(op, x.shape(), std::move(out), {&x}, [deriv](Node& self) {
    auto gx = grad_of(self, 0);
    const auto& xv = self.inputs[0]->value;
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += self.grad[i] * deriv(xv[i], self.value[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Copies `src` (shape `shape`) into `dst` with axes `a` and `b` swapped.
// Rows along an untouched last axis are moved as contiguous blocks.
void swap_axes_copy(std::span<const double> src, const Shape& shape, std::size_t a, std::size_t b,
                    std::span<double> dst) {
  const std::size_t rank = shape.size();
  Shape out_shape = shape;
  std::swap(out_shape[a], out_shape[b]);
  std::vector<std::size_t> in_stride(rank, 1);
  for (std::size_t i = rank - 1; i > 0; --i) in_stride[i - 1] = in_stride[i] * shape[i];
  std::vector<std::size_t> stride_for_out(in_stride);
  std::swap(stride_for_out[a], stride_for_out[b]);

  const bool contiguous_rows = a != rank - 1 && b != rank - 1;
  const std::size_t row = contiguous_rows ? out_shape[rank - 1] : 1;
  const std::size_t dims = contiguous_rows ? rank - 1 : rank;
  std::vector<std::size_t> index(dims, 0);
  std::size_t in_offset = 0;
  const std::size_t total = shape_size(shape);
  for (std::size_t out = 0; out < total; out += row) {
    std::copy_n(src.begin() + static_cast<long>(in_offset), row, dst.begin() + static_cast<long>(out));
    for (std::size_t d = dims; d-- > 0;) {
      ++index[d];
      in_offset += stride_for_out[d];
      if (index[d] < out_shape[d]) break;
      in_offset -= stride_for_out[d] * index[d];
      index[d] = 0;
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() < 2 || sb.size() < 2) shape_fail("matmul", "operands must be at least 2-D, got " + two(a, b));
  const std::size_t k = sa.back();

  if (sb.size() == 2) {
    if (sb[0] != k) shape_fail("matmul", "inner dimensions differ: " + two(a, b));
    const std::size_t n = sb[1];
    const std::size_t m = a.size() / k;
    Shape out_shape = sa;
    out_shape.back() = n;
    std::vector<double> out(m * n);
    MatMap(out.data(), static_cast<long>(m), static_cast<long>(n)).noalias() =
        ConstMatMap(a.values().data(), static_cast<long>(m), static_cast<long>(k)) *
        ConstMatMap(b.values().data(), static_cast<long>(k), static_cast<long>(n));
    return record("matmul", std::move(out_shape), std::move(out), {&a, &b}, [m, k, n](Node& self) {
      const long lm = static_cast<long>(m), lk = static_cast<long>(k), ln = static_cast<long>(n);
      ConstMatMap g(self.grad.data(), lm, ln);
      if (wants_grad(self, 0)) {
        MatMap(grad_of(self, 0).data(), lm, lk).noalias() +=
            g * ConstMatMap(self.inputs[1]->value.data(), lk, ln).transpose();
      }
      if (wants_grad(self, 1)) {
        MatMap(grad_of(self, 1).data(), lk, ln).noalias() +=
            ConstMatMap(self.inputs[0]->value.data(), lm, lk).transpose() * g;
      }
    });
  }

  const std::size_t r = sa.size();
  if (sb.size() != r || !std::equal(sa.begin(), sa.end() - 2, sb.begin()) || sb[r - 2] != k) {
    shape_fail("matmul", "incompatible batched operands " + two(a, b));
  }
  const std::size_t m = sa[r - 2];
  const std::size_t n = sb[r - 1];
  const std::size_t batch = a.size() / (m * k);
  Shape out_shape = sa;
  out_shape.back() = n;
  std::vector<double> out(batch * m * n);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  const long lm = static_cast<long>(m), lk = static_cast<long>(k), ln = static_cast<long>(n);
  for (std::size_t i = 0; i < batch; ++i) {
    MatMap(out.data() + i * m * n, lm, ln).noalias() =
        ConstMatMap(ap + i * m * k, lm, lk) * ConstMatMap(bp + i * k * n, lk, ln);
  }
  return record("matmul", std::move(out_shape), std::move(out), {&a, &b},
                [batch, m, k, n](Node& self) {
                  const long lm = static_cast<long>(m), lk = static_cast<long>(k), ln = static_cast<long>(n);
                  const bool ga = wants_grad(self, 0);
                  const bool gb = wants_grad(self, 1);
                  double* da = ga ? grad_of(self, 0).data() : nullptr;
                  double* db = gb ? grad_of(self, 1).data() : nullptr;
                  const double* av = self.inputs[0]->value.data();
                  const double* bv = self.inputs[1]->value.data();
                  for (std::size_t i = 0; i < batch; ++i) {
                    ConstMatMap g(self.grad.data() + i * m * n, lm, ln);
                    if (ga) {
                      MatMap(da + i * m * k, lm, lk).noalias() +=
                          g * ConstMatMap(bv + i * k * n, lk, ln).transpose();
                    }
                    if (gb) {
                      MatMap(db + i * k * n, lk, ln).noalias() +=
                          ConstMatMap(av + i * m * k, lm, lk).transpose() * g;
                    }
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary("add", Binary::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary("sub", Binary::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary("mul", Binary::kMul, a, b); }

Tensor scale(const Tensor& x, double factor) {
  return unary(
      "scale", x, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor gelu(const Tensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double k = 0.044715;
  return unary(
      "gelu", x,
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + k * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(c * (v + k * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * k * v * v);
      });
}

Tensor softmax(const Tensor& x, int axis) {
  const std::size_t ax = normalize_axis("softmax", axis, x.rank());
  const AxisSplit s = split_at(x.shape(), ax);
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t i = 0; i < s.inner; ++i) {
      const std::size_t base = o * s.extent * s.inner + i;
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < s.extent; ++j) peak = std::max(peak, xv[base + j * s.inner]);
      double total = 0.0;
      for (std::size_t j = 0; j < s.extent; ++j) {
        const double e = std::exp(xv[base + j * s.inner] - peak);
        out[base + j * s.inner] = e;
        total += e;
      }
      for (std::size_t j = 0; j < s.extent; ++j) out[base + j * s.inner] /= total;
    }
  }
  return record("softmax", x.shape(), std::move(out), {&x}, [s](Node& self) {
    auto gx = grad_of(self, 0);
    const auto& y = self.value;
    const auto& g = self.grad;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t i = 0; i < s.inner; ++i) {
        const std::size_t base = o * s.extent * s.inner + i;
        double dot = 0.0;
        for (std::size_t j = 0; j < s.extent; ++j) dot += g[base + j * s.inner] * y[base + j * s.inner];
        for (std::size_t j = 0; j < s.extent; ++j) {
          const std::size_t idx = base + j * s.inner;
          gx[idx] += y[idx] * (g[idx] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double epsilon) {
  if (x.rank() == 0) shape_fail("layer_norm", "input must have at least one axis");
  const std::size_t d = x.shape().back();
  if (gamma.shape() != Shape{d} || beta.shape() != Shape{d}) {
    shape_fail("layer_norm", "gamma/beta must be [" + std::to_string(d) + "], got " +
                                 two(gamma, beta));
  }
  const std::size_t rows = x.size() / d;
  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(xv.size());
  std::vector<double> mean(rows);
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + epsilon);
    mean[r] = mu;
    rstd[r] = inv;
    for (std::size_t j = 0; j < d; ++j) out[r * d + j] = (row[j] - mu) * inv * gv[j] + bv[j];
  }
  return record("layer_norm", x.shape(), std::move(out), {&x, &gamma, &beta},
                [rows, d, mean = std::move(mean), rstd = std::move(rstd)](Node& self) {
                  const auto& xv = self.inputs[0]->value;
                  const auto& gv = self.inputs[1]->value;
                  const auto& g = self.grad;
                  const bool want_x = wants_grad(self, 0);
                  const bool want_gamma = wants_grad(self, 1);
                  const bool want_beta = wants_grad(self, 2);
                  std::span<double> gx, ggamma, gbeta;
                  if (want_x) gx = grad_of(self, 0);
                  if (want_gamma) ggamma = grad_of(self, 1);
                  if (want_beta) gbeta = grad_of(self, 2);
                  std::vector<double> xhat(d), dxhat(d);
                  const double inv_d = 1.0 / static_cast<double>(d);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double mean_dxhat = 0.0;
                    double mean_dxhat_xhat = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      const std::size_t idx = r * d + j;
                      xhat[j] = (xv[idx] - mean[r]) * rstd[r];
                      dxhat[j] = g[idx] * gv[j];
                      mean_dxhat += dxhat[j];
                      mean_dxhat_xhat += dxhat[j] * xhat[j];
                      if (want_gamma) ggamma[j] += g[idx] * xhat[j];
                      if (want_beta) gbeta[j] += g[idx];
                    }
                    if (!want_x) continue;
                    mean_dxhat *= inv_d;
                    mean_dxhat_xhat *= inv_d;
                    for (std::size_t j = 0; j < d; ++j) {
                      gx[r * d + j] += rstd[r] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
                    }
                  }
                });
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape() != target.shape()) shape_fail("mse", "shape mismatch " + two(prediction, target));
  auto p = prediction.values();
  auto t = target.values();
  const std::size_t n = p.size();
  if (n == 0) shape_fail("mse", "empty operands");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (p[i] - t[i]) * (p[i] - t[i]);
  return record("mse", {}, {total / static_cast<double>(n)}, {&prediction, &target}, [n](Node& self) {
    const double coef = 2.0 * self.grad[0] / static_cast<double>(n);
    const auto& p = self.inputs[0]->value;
    const auto& t = self.inputs[1]->value;
    if (wants_grad(self, 0)) {
      auto gp = grad_of(self, 0);
      for (std::size_t i = 0; i < n; ++i) gp[i] += coef * (p[i] - t[i]);
    }
    if (wants_grad(self, 1)) {
      auto gt = grad_of(self, 1);
      for (std::size_t i = 0; i < n; ++i) gt[i] -= coef * (p[i] - t[i]);
    }
  });
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    shape_fail("bce_with_logits", "shape mismatch " + two(logits, targets));
  }
  auto z = logits.values();
  auto y = targets.values();
  const std::size_t n = z.size();
  if (n == 0) shape_fail("bce_with_logits", "empty operands");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::max(z[i], 0.0) - z[i] * y[i] + std::log1p(std::exp(-std::abs(z[i])));
  }
  // Targets are labels: only the logits side is differentiated.
  return record("bce_with_logits", {}, {total / static_cast<double>(n)}, {&logits, &targets},
                [n](Node& self) {
                  if (!wants_grad(self, 0)) return;
                  auto gz = grad_of(self, 0);
                  const auto& z = self.inputs[0]->value;
                  const auto& y = self.inputs[1]->value;
                  const double coef = self.grad[0] / static_cast<double>(n);
                  for (std::size_t i = 0; i < n; ++i) gz[i] += coef * (stable_sigmoid(z[i]) - y[i]);
                });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.values()) total += v;
  return record("sum", {}, {total}, {&x}, [](Node& self) {
    auto gx = grad_of(self, 0);
    for (double& g : gx) g += self.grad[0];
  });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank()) shape_fail("slice", "axis " + std::to_string(axis) + " out of range for " + shape_string(x.shape()));
  if (start + length > x.shape()[axis]) {
    shape_fail("slice", "range [" + std::to_string(start) + ", " + std::to_string(start + length) +
                            ") exceeds axis " + std::to_string(axis) + " of " + shape_string(x.shape()));
  }
  const AxisSplit s = split_at(x.shape(), axis);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t block = length * s.inner;
  auto xv = x.values();
  std::vector<double> out(s.outer * block);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<long>(o * s.extent * s.inner + start * s.inner), block,
                out.begin() + static_cast<long>(o * block));
  }
  return record("slice", std::move(out_shape), std::move(out), {&x}, [s, start, block](Node& self) {
    auto gx = grad_of(self, 0);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = gx.data() + o * s.extent * s.inner + start * s.inner;
      const double* src = self.grad.data() + o * block;
      for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
    }
  });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) shape_fail("concat", "axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor& p : parts) {
    const Shape& sp = p.shape();
    bool ok = sp.size() == first.size();
    for (std::size_t i = 0; ok && i < sp.size(); ++i) ok = i == axis || sp[i] == first[i];
    if (!ok) shape_fail("concat", "part " + shape_string(sp) + " incompatible with " + shape_string(first));
    out_shape[axis] += sp[axis];
  }
  const AxisSplit s = split_at(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> extents;
  extents.reserve(parts.size());
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const std::size_t ext = p.shape()[axis];
    const std::size_t block = ext * s.inner;
    auto pv = p.values();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(pv.begin() + static_cast<long>(o * block), block,
                  out.begin() + static_cast<long>(o * s.extent * s.inner + offset * s.inner));
    }
    extents.push_back(ext);
    offset += ext;
  }

  auto node = std::make_shared<Node>();
  node->op = "concat";
  node->leaf = false;
  node->shape = std::move(out_shape);
  node->value = std::move(out);
  bool needs = false;
  if (grad_enabled()) {
    for (const Tensor& p : parts) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (const Tensor& p : parts) node->inputs.push_back(p.node());
    node->backward = [s, extents = std::move(extents)](Node& self) {
      std::size_t offset = 0;
      for (std::size_t i = 0; i < extents.size(); ++i) {
        const std::size_t block = extents[i] * s.inner;
        if (wants_grad(self, i)) {
          auto gp = grad_of(self, i);
          for (std::size_t o = 0; o < s.outer; ++o) {
            const double* src = self.grad.data() + o * s.extent * s.inner + offset * s.inner;
            double* dst = gp.data() + o * block;
            for (std::size_t j = 0; j < block; ++j) dst[j] += src[j];
          }
        }
        offset += extents[i];
      }
    };
  }
  return Tensor::from_node(std::move(node));
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b) {
  const std::size_t rank = x.rank();
  if (axis_a >= rank || axis_b >= rank) {
    shape_fail("transpose", "axes (" + std::to_string(axis_a) + ", " + std::to_string(axis_b) +
                                ") out of range for " + shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  std::swap(out_shape[axis_a], out_shape[axis_b]);
  std::vector<double> out(x.size());
  if (axis_a == axis_b) {
    std::copy(x.values().begin(), x.values().end(), out.begin());
  } else {
    swap_axes_copy(x.values(), x.shape(), axis_a, axis_b, out);
  }
  return record("transpose", out_shape, std::move(out), {&x}, [out_shape, axis_a, axis_b](Node& self) {
    auto gx = grad_of(self, 0);
    std::vector<double> tmp(gx.size());
    if (axis_a == axis_b) {
      tmp = self.grad;
    } else {
      swap_axes_copy(self.grad, out_shape, axis_a, axis_b, tmp);
    }
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += tmp[i];
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    shape_fail("reshape", "cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  return record("reshape", std::move(shape), std::move(out), {&x}, [](Node& self) {
    auto gx = grad_of(self, 0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += self.grad[i];
  });
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> indices) {
  if (table.rank() != 2) shape_fail("embedding", "table must be 2-D, got " + shape_string(table.shape()));
  const std::size_t rows = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<double> out(indices.size() * d);
  auto tv = table.values();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows) {
      shape_fail("embedding", "index " + std::to_string(indices[i]) + " out of range for table " +
                                  shape_string(table.shape()));
    }
    std::copy_n(tv.begin() + static_cast<long>(indices[i] * d), d, out.begin() + static_cast<long>(i * d));
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return record("embedding", {indices.size(), d}, std::move(out), {&table}, [idx = std::move(idx), d](Node& self) {
    auto gt = grad_of(self, 0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) gt[idx[i] * d + j] += self.grad[i * d + j];
    }
  });
}

}  // namespace icnf
