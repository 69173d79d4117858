#include "icnf/nn.hpp"

#include <algorithm>
#include <cmath>

#include "icnf/error.hpp"

namespace icnf::nn {

void add_linear(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  params.add_uniform(prefix + ".weight", {in, out}, in, rng);
  params.add_uniform(prefix + ".bias", {out}, in, rng);
}

Linear linear_weights(const ParamStore& params, const std::string& prefix) {
  return {params.at(prefix + ".weight"), params.at(prefix + ".bias")};
}

Tensor apply(const Linear& layer, const Tensor& x) { return add(matmul(x, layer.weight), layer.bias); }

void add_layer_norm(ParamStore& params, const std::string& prefix, std::size_t dim) {
  params.add_constant(prefix + ".gamma", {dim}, 1.0);
  params.add_constant(prefix + ".beta", {dim}, 0.0);
}

LayerNorm layer_norm_weights(const ParamStore& params, const std::string& prefix) {
  return {params.at(prefix + ".gamma"), params.at(prefix + ".beta")};
}

Tensor apply(const LayerNorm& norm, const Tensor& x) { return layer_norm(x, norm.gamma, norm.beta); }

void add_lstm(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng,
              double forget_bias) {
  params.add_uniform(prefix + ".w_x", {in, 4 * hidden}, in, rng);
  params.add_uniform(prefix + ".w_h", {hidden, 4 * hidden}, hidden, rng);
  Tensor& bias = params.add_uniform(prefix + ".bias", {4 * hidden}, hidden, rng);
  auto b = bias.mutable_values();
  std::fill(b.begin(), b.end(), 0.0);
  std::fill(b.begin() + static_cast<long>(hidden), b.begin() + static_cast<long>(2 * hidden), forget_bias);
}

Lstm lstm_weights(const ParamStore& params, const std::string& prefix) {
  Lstm lstm{params.at(prefix + ".w_x"), params.at(prefix + ".w_h"), params.at(prefix + ".bias"), 0};
  if (lstm.w_h.rank() != 2 || lstm.w_h.dim(1) != 4 * lstm.w_h.dim(0)) {
    throw ShapeError("lstm '" + prefix + "': w_h must be [h, 4h], got " + shape_string(lstm.w_h.shape()));
  }
  lstm.hidden = lstm.w_h.dim(0);
  return lstm;
}

std::vector<Tensor> run_lstm(const Lstm& lstm, std::span<const Tensor> steps) {
  const std::size_t h = lstm.hidden;
  std::vector<Tensor> hidden;
  hidden.reserve(steps.size());
  Tensor state_h;
  Tensor state_c;
  for (const Tensor& x : steps) {
    Tensor gates = matmul(x, lstm.w_x);
    if (state_h.defined()) gates = add(gates, matmul(state_h, lstm.w_h));
    gates = add(gates, lstm.bias);
    const Tensor in_gate = sigmoid(slice(gates, 1, 0, h));
    const Tensor forget_gate = sigmoid(slice(gates, 1, h, h));
    const Tensor candidate = tanh(slice(gates, 1, 2 * h, h));
    const Tensor out_gate = sigmoid(slice(gates, 1, 3 * h, h));
    state_c = state_c.defined() ? add(mul(forget_gate, state_c), mul(in_gate, candidate))
                                : mul(in_gate, candidate);
    state_h = mul(out_gate, tanh(state_c));
    hidden.push_back(state_h);
  }
  return hidden;
}

void add_attention(ParamStore& params, const std::string& prefix, std::size_t d_model, Rng& rng) {
  for (const char* part : {".query", ".key", ".value", ".out"}) {
    add_linear(params, prefix + part, d_model, d_model, rng);
  }
}

MultiHeadAttention attention_weights(const ParamStore& params, const std::string& prefix, std::size_t heads) {
  MultiHeadAttention attn{linear_weights(params, prefix + ".query"), linear_weights(params, prefix + ".key"),
                          linear_weights(params, prefix + ".value"), linear_weights(params, prefix + ".out"),
                          heads};
  const std::size_t d = attn.query.weight.dim(1);
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("attention '" + prefix + "': d_model " + std::to_string(d) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  return attn;
}

namespace {

// [B, T, d] -> [B, heads, T, d/heads]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const std::size_t b = x.dim(0), t = x.dim(1), d = x.dim(2);
  return transpose(reshape(x, {b, t, heads, d / heads}), 1, 2);
}

}  // namespace

Tensor apply(const MultiHeadAttention& attn, const Tensor& queries, const Tensor& memory, AttentionTrace* trace) {
  if (queries.rank() != 3 || memory.rank() != 3 || queries.dim(0) != memory.dim(0) ||
      queries.dim(2) != memory.dim(2)) {
    throw ShapeError("attention: queries " + shape_string(queries.shape()) + " incompatible with memory " +
                     shape_string(memory.shape()));
  }
  const std::size_t b = queries.dim(0), tq = queries.dim(1), d = queries.dim(2);
  const std::size_t head_dim = d / attn.heads;
  const Tensor q = split_heads(apply(attn.query, queries), attn.heads);
  const Tensor k = split_heads(apply(attn.key, memory), attn.heads);
  const Tensor v = split_heads(apply(attn.value, memory), attn.heads);
  const Tensor scores = scale(matmul(q, transpose(k, 2, 3)), 1.0 / std::sqrt(static_cast<double>(head_dim)));
  const Tensor weights = softmax(scores, -1);
  if (trace) trace->weights.push_back(weights);
  const Tensor context = reshape(transpose(matmul(weights, v), 1, 2), {b, tq, d});
  return apply(attn.out, context);
}

std::vector<Tensor> unstack_time(const Tensor& x) {
  if (x.rank() != 3) throw ShapeError("unstack_time: expected [B, T, C], got " + shape_string(x.shape()));
  const std::size_t b = x.dim(0), t = x.dim(1), c = x.dim(2);
  std::vector<Tensor> steps;
  steps.reserve(t);
  for (std::size_t i = 0; i < t; ++i) steps.push_back(reshape(slice(x, 1, i, 1), {b, c}));
  return steps;
}

}  // namespace icnf::nn
