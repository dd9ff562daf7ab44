#include "prefalign/nn/policy.hpp"

#include <algorithm>
#include <cmath>

#include "prefalign/common/error.hpp"
#include "prefalign/nn/checkpoint.hpp"

namespace prefalign::nn {

namespace {

constexpr double kInitStd = 0.02;

std::vector<double> vec_mat(std::span<const double> x, const Tensor& w, const Tensor& b) {
  const int in = w.rows(), out = w.cols();
  std::vector<double> y(b.values().begin(), b.values().end());
  auto wv = w.values();
  for (int i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* row = wv.data() + static_cast<std::size_t>(i) * out;
    for (int j = 0; j < out; ++j) y[j] += xi * row[j];
  }
  return y;
}

std::vector<double> norm_vec(std::span<const double> x, const LayerNorm& ln) {
  const std::size_t n = x.size();
  double mu = 0.0;
  for (double v : x) mu += v;
  mu /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= static_cast<double>(n);
  const double r = 1.0 / std::sqrt(var + 1e-5);
  std::vector<double> y(n);
  for (std::size_t j = 0; j < n; ++j) y[j] = (x[j] - mu) * r * ln.gain.values()[j] + ln.bias.values()[j];
  return y;
}

double gelu_scalar(double x) {
  return 0.5 * x * (1.0 + std::tanh(0.7978845608028654 * (x + 0.044715 * x * x * x)));
}

}  // namespace

void TransformerConfig::validate() const {
  if (vocab_size <= 0 || d_model <= 0 || n_heads <= 0 || n_layers < 0 || d_ff <= 0 || max_seq_len <= 0) {
    throw ValidationError("transformer config: all sizes must be positive");
  }
  if (d_model % n_heads != 0) throw ValidationError("transformer config: d_model must be divisible by n_heads");
}

nlohmann::json TransformerConfig::to_json() const {
  return {{"vocab_size", vocab_size}, {"d_model", d_model},   {"n_heads", n_heads},
          {"n_layers", n_layers},     {"d_ff", d_ff},         {"max_seq_len", max_seq_len}};
}

TransformerConfig TransformerConfig::from_json(const nlohmann::json& j) {
  TransformerConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.validate();
  return c;
}

PolicyModel::PolicyModel(const TransformerConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const double out_std = kInitStd / std::sqrt(2.0 * std::max(1, config_.n_layers));
  tok_emb_ = params_.add("tok_emb", config_.vocab_size, config_.d_model);
  init_normal(tok_emb_, kInitStd, rng);
  pos_emb_ = params_.add("pos_emb", config_.max_seq_len, config_.d_model);
  init_normal(pos_emb_, kInitStd, rng);
  for (int l = 0; l < config_.n_layers; ++l) {
    blocks_.emplace_back(params_, "block" + std::to_string(l), config_.d_model, config_.n_heads, config_.d_ff,
                         /*with_cross=*/false, kInitStd, out_std, rng);
  }
  ln_final_ = LayerNorm(params_, "ln_final", config_.d_model);
  head_ = Linear(params_, "head", config_.d_model, config_.vocab_size, kInitStd, rng);
}

PolicyModel PolicyModel::clone() const {
  PolicyModel copy(config_, 0);
  copy.params_.assign(params_.flatten());
  return copy;
}

Tensor PolicyModel::logits(std::span<const int> tokens) const { return head_(hidden_states(tokens)); }

Tensor PolicyModel::hidden_states(std::span<const int> tokens) const {
  const int t = static_cast<int>(tokens.size());
  if (t == 0) throw Error("PolicyModel::logits: empty input");
  if (t > config_.max_seq_len) throw ValidationError("sequence length exceeds max_seq_len");
  std::vector<int> positions(t);
  for (int i = 0; i < t; ++i) positions[i] = i;
  Tensor x = add(embedding(tok_emb_, tokens), embedding(pos_emb_, positions));
  for (const auto& block : blocks_) x = block.forward(x, /*causal=*/true);
  return ln_final_(x);
}

void PolicyModel::force_output_bias(std::span<const double> bias) {
  if (static_cast<int>(bias.size()) != config_.vocab_size) throw Error("force_output_bias: size mismatch");
  init_constant(head_.weight, 0.0);
  std::copy(bias.begin(), bias.end(), head_.bias.values().begin());
}

SequenceLogProb sequence_logprob(const PolicyModel& model, std::span<const int> input,
                                 std::span<const int> target) {
  const std::size_t total_len = input.size() + target.size();
  if (static_cast<int>(total_len) > model.config().max_seq_len) {
    throw ValidationError("sequence_logprob: input + target length " + std::to_string(total_len) +
                          " exceeds max_seq_len " + std::to_string(model.config().max_seq_len));
  }
  if (target.empty()) return {Tensor::scalar(0.0), Tensor::zeros(0, 1)};
  if (input.empty()) throw ValidationError("sequence_logprob: input must contain at least one token");

  std::vector<int> seq(input.begin(), input.end());
  seq.insert(seq.end(), target.begin(), target.end() - 1);
  Tensor logits = model.logits(seq);
  const int first = static_cast<int>(input.size()) - 1;
  Tensor rows = slice_rows(logits, first, static_cast<int>(target.size()));
  Tensor per_token = log_softmax_pick(rows, target);
  return {sum(per_token), per_token};
}

IncrementalDecoder::IncrementalDecoder(const PolicyModel& model)
    : model_(model), keys_(model.blocks().size()), values_(model.blocks().size()) {}

std::vector<double> IncrementalDecoder::push(int token) {
  const auto& cfg = model_.config();
  if (length_ >= cfg.max_seq_len) throw ValidationError("IncrementalDecoder: context is full");
  if (token < 0 || token >= cfg.vocab_size) throw Error("IncrementalDecoder: token out of range");
  const int d = cfg.d_model;
  const int pos = length_;
  std::vector<double> x(d);
  auto te = model_.token_embedding().values();
  auto pe = model_.position_embedding().values();
  for (int j = 0; j < d; ++j) x[j] = te[static_cast<std::size_t>(token) * d + j] + pe[static_cast<std::size_t>(pos) * d + j];

  for (std::size_t l = 0; l < model_.blocks().size(); ++l) {
    const auto& blk = model_.blocks()[l];
    const int heads = blk.self_attn.heads;
    const int hd = d / heads;
    const double sc = 1.0 / std::sqrt(static_cast<double>(hd));
    auto h = norm_vec(x, blk.ln_self);
    auto q = vec_mat(h, blk.self_attn.query.weight, blk.self_attn.query.bias);
    auto k = vec_mat(h, blk.self_attn.key.weight, blk.self_attn.key.bias);
    auto v = vec_mat(h, blk.self_attn.value.weight, blk.self_attn.value.bias);
    keys_[l].insert(keys_[l].end(), k.begin(), k.end());
    values_[l].insert(values_[l].end(), v.begin(), v.end());
    const int n = pos + 1;
    std::vector<double> att(d, 0.0);
    std::vector<double> w(n);
    for (int hh = 0; hh < heads; ++hh) {
      const int off = hh * hd;
      double mx = -1e300;
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int c = 0; c < hd; ++c) s += q[off + c] * keys_[l][static_cast<std::size_t>(j) * d + off + c];
        w[j] = s * sc;
        mx = std::max(mx, w[j]);
      }
      double z = 0.0;
      for (int j = 0; j < n; ++j) {
        w[j] = std::exp(w[j] - mx);
        z += w[j];
      }
      for (int j = 0; j < n; ++j) {
        const double p = w[j] / z;
        for (int c = 0; c < hd; ++c) att[off + c] += p * values_[l][static_cast<std::size_t>(j) * d + off + c];
      }
    }
    auto o = vec_mat(att, blk.self_attn.output.weight, blk.self_attn.output.bias);
    for (int j = 0; j < d; ++j) x[j] += o[j];
    auto h2 = norm_vec(x, blk.ln_ff);
    auto up = vec_mat(h2, blk.ff.up.weight, blk.ff.up.bias);
    for (double& u : up) u = gelu_scalar(u);
    auto down = vec_mat(up, blk.ff.down.weight, blk.ff.down.bias);
    for (int j = 0; j < d; ++j) x[j] += down[j];
  }
  ++length_;
  auto hf = norm_vec(x, model_.final_norm());
  return vec_mat(hf, model_.head().weight, model_.head().bias);
}

Sample sample_sequence(const PolicyModel& model, std::span<const int> input, const SampleOptions& opts, Rng& rng) {
  if (!opts.greedy && !(opts.temperature > 0.0)) throw ValidationError("sample_response: temperature must be > 0");
  if (input.empty()) throw ValidationError("sample_response: input must be non-empty");
  IncrementalDecoder dec(model);
  std::vector<double> logits;
  for (int tok : input) logits = dec.push(tok);
  Sample result;
  auto& out = result.tokens;
  const int room = model.config().max_seq_len - static_cast<int>(input.size());
  const int limit = std::min(opts.max_len, room);
  while (static_cast<int>(out.size()) < limit) {
    int next;
    if (opts.greedy) {
      next = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    } else {
      next = static_cast<int>(sample_categorical(softmax_row(logits, opts.temperature), rng));
    }
    if (opts.eos && next == *opts.eos) {
      result.stopped = true;
      break;
    }
    out.push_back(next);
    if (static_cast<int>(out.size()) < limit) logits = dec.push(next);
  }
  return result;
}

std::vector<int> sample_response(const PolicyModel& model, std::span<const int> input, const SampleOptions& opts,
                                 Rng& rng) {
  return sample_sequence(model, input, opts, rng).tokens;
}

void save_policy(const std::filesystem::path& path, const PolicyModel& model) {
  save_checkpoint(path, "policy", model.config().to_json(), model.params());
}

PolicyModel load_policy(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "policy") throw ValidationError("expected a policy checkpoint, found '" + ck.kind + "'");
  PolicyModel model(TransformerConfig::from_json(ck.config), 0);
  model.params().assign(ck.values);
  return model;
}

}  // namespace prefalign::nn
