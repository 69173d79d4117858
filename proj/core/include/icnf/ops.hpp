#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "icnf/tensor.hpp"

// Differentiable primitives. Every op records a tape entry when grad mode is
// on and at least one input requires grad. Shape errors throw ShapeError with
// the op name and the offending shapes.

namespace icnf {

/// a[..., m, k] x b[k, n] -> [..., m, n], or batched a[B..., m, k] x b[B..., k, n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise with suffix broadcasting: `b`'s shape must equal `a`'s or be a
/// trailing sub-shape of it (bias vectors, positional tables). Arguments may be
/// given in either order.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
/// tanh approximation of GELU.
Tensor gelu(const Tensor& x);

/// Softmax along `axis`; negative axes count from the back.
Tensor softmax(const Tensor& x, int axis = -1);

/// Normalises over the last axis, then applies gamma/beta of that length.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double epsilon = 1e-5);

/// Mean squared error over all elements; returns a scalar.
Tensor mse(const Tensor& prediction, const Tensor& target);

/// Mean binary cross-entropy on logits. Targets are treated as constants.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

/// Sum of all elements; returns a scalar.
Tensor sum(const Tensor& x);

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
Tensor transpose(const Tensor& x, std::size_t axis_a, std::size_t axis_b);
Tensor reshape(const Tensor& x, Shape shape);

/// Row gather: table[V, d] at `indices` -> [indices.size(), d].
Tensor embedding(const Tensor& table, std::span<const std::size_t> indices);

}  // namespace icnf
