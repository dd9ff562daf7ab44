#include "prefalign/nn/layers.hpp"

namespace prefalign::nn {

Linear::Linear(ParameterSet& ps, const std::string& name, int in, int out, double init_std, Rng& rng)
    : weight(ps.add(name + ".weight", in, out)), bias(ps.add(name + ".bias", 1, out)) {
  init_normal(weight, init_std, rng);
}

LayerNorm::LayerNorm(ParameterSet& ps, const std::string& name, int width)
    : gain(ps.add(name + ".gain", 1, width)), bias(ps.add(name + ".bias", 1, width)) {
  init_constant(gain, 1.0);
}

MultiHeadAttention::MultiHeadAttention(ParameterSet& ps, const std::string& name, int width, int heads_,
                                       double init_std, double out_std, Rng& rng)
    : query(ps, name + ".query", width, width, init_std, rng),
      key(ps, name + ".key", width, width, init_std, rng),
      value(ps, name + ".value", width, width, init_std, rng),
      output(ps, name + ".output", width, width, out_std, rng),
      heads(heads_) {}

Tensor MultiHeadAttention::operator()(const Tensor& x, const Tensor& memory, bool causal) const {
  return output(attention(query(x), key(memory), value(memory), heads, causal));
}

FeedForward::FeedForward(ParameterSet& ps, const std::string& name, int width, int hidden, double init_std,
                         double out_std, Rng& rng)
    : up(ps, name + ".up", width, hidden, init_std, rng), down(ps, name + ".down", hidden, width, out_std, rng) {}

TransformerBlock::TransformerBlock(ParameterSet& ps, const std::string& name, int width, int heads, int hidden,
                                   bool with_cross, double init_std, double out_std, Rng& rng)
    : ln_self(ps, name + ".ln_self", width),
      self_attn(ps, name + ".self_attn", width, heads, init_std, out_std, rng) {
  if (with_cross) {
    ln_cross.emplace(ps, name + ".ln_cross", width);
    cross_attn.emplace(ps, name + ".cross_attn", width, heads, init_std, out_std, rng);
  }
  ln_ff = LayerNorm(ps, name + ".ln_ff", width);
  ff = FeedForward(ps, name + ".ff", width, hidden, init_std, out_std, rng);
}

Tensor TransformerBlock::forward(const Tensor& x, bool causal, const Tensor* memory) const {
  Tensor h = ln_self(x);
  Tensor y = add(x, self_attn(h, h, causal));
  if (cross_attn && memory != nullptr) {
    y = add(y, (*cross_attn)((*ln_cross)(y), *memory, /*causal=*/false));
  }
  return add(y, ff(ln_ff(y)));
}

Mlp3::Mlp3(ParameterSet& ps, const std::string& name, int in, int hidden, int out, double init_std, Rng& rng)
    : l1(ps, name + ".l1", in, hidden, init_std, rng),
      l2(ps, name + ".l2", hidden, hidden, init_std, rng),
      l3(ps, name + ".l3", hidden, out, init_std, rng) {}

}  // namespace prefalign::nn
