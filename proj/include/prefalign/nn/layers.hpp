#pragma once

#include <optional>
#include <string>

#include "prefalign/nn/ops.hpp"
#include "prefalign/nn/params.hpp"

namespace prefalign::nn {

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  Linear(ParameterSet& ps, const std::string& name, int in, int out, double init_std, Rng& rng);
  Tensor operator()(const Tensor& x) const { return add_row(matmul(x, weight), bias); }
  int in() const { return weight.rows(); }
  int out() const { return weight.cols(); }
};

struct LayerNorm {
  Tensor gain;
  Tensor bias;

  LayerNorm() = default;
  LayerNorm(ParameterSet& ps, const std::string& name, int width);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain, bias); }
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterSet& ps, const std::string& name, int width, int heads, double init_std,
                     double out_std, Rng& rng);
  Tensor operator()(const Tensor& x, const Tensor& memory, bool causal) const;
};

struct FeedForward {
  Linear up, down;

  FeedForward() = default;
  FeedForward(ParameterSet& ps, const std::string& name, int width, int hidden, double init_std, double out_std,
              Rng& rng);
  Tensor operator()(const Tensor& x) const { return down(gelu(up(x))); }
};

/// Pre-norm transformer block: self-attention, optional cross-attention over
/// an encoder memory, then a feed-forward sublayer, each residual.
struct TransformerBlock {
  LayerNorm ln_self;
  MultiHeadAttention self_attn;
  std::optional<LayerNorm> ln_cross;
  std::optional<MultiHeadAttention> cross_attn;
  LayerNorm ln_ff;
  FeedForward ff;

  TransformerBlock() = default;
  TransformerBlock(ParameterSet& ps, const std::string& name, int width, int heads, int hidden, bool with_cross,
                   double init_std, double out_std, Rng& rng);
  Tensor forward(const Tensor& x, bool causal, const Tensor* memory = nullptr) const;
};

/// Three-layer perceptron with GELU between layers.
struct Mlp3 {
  Linear l1, l2, l3;

  Mlp3() = default;
  Mlp3(ParameterSet& ps, const std::string& name, int in, int hidden, int out, double init_std, Rng& rng);
  Tensor operator()(const Tensor& x) const { return l3(gelu(l2(gelu(l1(x))))); }
};

}  // namespace prefalign::nn
