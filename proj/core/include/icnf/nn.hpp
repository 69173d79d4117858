#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "icnf/ops.hpp"
#include "icnf/params.hpp"
#include "icnf/rng.hpp"

// Layer helpers shared by the forecasters and the classifier. Parameters live
// in a ParamStore under a dotted prefix; the `*_weights` structs resolve the
// names once per forward pass.

namespace icnf::nn {

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};
void add_linear(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
Linear linear_weights(const ParamStore& params, const std::string& prefix);
/// x[..., in] -> [..., out]
Tensor apply(const Linear& layer, const Tensor& x);

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
};
void add_layer_norm(ParamStore& params, const std::string& prefix, std::size_t dim);
LayerNorm layer_norm_weights(const ParamStore& params, const std::string& prefix);
Tensor apply(const LayerNorm& norm, const Tensor& x);

/// Gate blocks are packed [input, forget, cell, output] along the last axis.
struct Lstm {
  Tensor w_x;   // [in, 4h]
  Tensor w_h;   // [h, 4h]
  Tensor bias;  // [4h]
  std::size_t hidden = 0;
};
void add_lstm(ParamStore& params, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng,
              double forget_bias = 1.0);
Lstm lstm_weights(const ParamStore& params, const std::string& prefix);
/// Runs from zero state over per-step inputs [B, in]; returns h_t [B, h] per step.
std::vector<Tensor> run_lstm(const Lstm& lstm, std::span<const Tensor> steps);

/// Softmax matrices captured during a forward pass, each [B, heads, Tq, Tk].
struct AttentionTrace {
  std::vector<Tensor> weights;
};

struct MultiHeadAttention {
  Linear query, key, value, out;
  std::size_t heads = 1;
};
void add_attention(ParamStore& params, const std::string& prefix, std::size_t d_model, Rng& rng);
MultiHeadAttention attention_weights(const ParamStore& params, const std::string& prefix, std::size_t heads);
/// Scaled dot-product attention of `queries` [B, Tq, d] over `memory` [B, Tk, d].
Tensor apply(const MultiHeadAttention& attn, const Tensor& queries, const Tensor& memory,
             AttentionTrace* trace = nullptr);

/// Splits per-step slices out of a [B, T, C] tensor as T tensors of [B, C].
std::vector<Tensor> unstack_time(const Tensor& x);

}  // namespace icnf::nn
