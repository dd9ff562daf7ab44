#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "prefalign/common/random.hpp"
#include "prefalign/nn/layers.hpp"

namespace prefalign::nn {

struct TransformerConfig {
  int vocab_size = 260;
  int d_model = 32;
  int n_heads = 4;
  int n_layers = 2;
  int d_ff = 64;
  int max_seq_len = 256;

  void validate() const;
  nlohmann::json to_json() const;
  static TransformerConfig from_json(const nlohmann::json& j);
  bool operator==(const TransformerConfig&) const = default;
};

/// Decoder-only transformer language model. Row t of logits() is the
/// distribution of token t+1 given tokens 0..t.
class PolicyModel {
 public:
  PolicyModel(const TransformerConfig& config, std::uint64_t seed);
  PolicyModel(PolicyModel&&) noexcept = default;
  PolicyModel& operator=(PolicyModel&&) noexcept = default;
  PolicyModel(const PolicyModel&) = delete;
  PolicyModel& operator=(const PolicyModel&) = delete;

  /// Deep copy with independent parameter storage.
  PolicyModel clone() const;

  Tensor logits(std::span<const int> tokens) const;
  /// Final normalized hidden states, one row per token.
  Tensor hidden_states(std::span<const int> tokens) const;

  const TransformerConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  /// Zeroes the output projection so every position predicts softmax(bias).
  void force_output_bias(std::span<const double> bias);

  // Exposed for the incremental decoder.
  const Tensor& token_embedding() const { return tok_emb_; }
  const Tensor& position_embedding() const { return pos_emb_; }
  const std::vector<TransformerBlock>& blocks() const { return blocks_; }
  const LayerNorm& final_norm() const { return ln_final_; }
  const Linear& head() const { return head_; }

 private:
  TransformerConfig config_;
  ParameterSet params_;
  Tensor tok_emb_;
  Tensor pos_emb_;
  std::vector<TransformerBlock> blocks_;
  LayerNorm ln_final_;
  Linear head_;
};

struct SequenceLogProb {
  Tensor total;      // 1 x 1
  Tensor per_token;  // n x 1
  double value() const { return total.item(); }
};

/// log pi(target | input) summed over target tokens. `input` must be
/// non-empty whenever `target` is.
SequenceLogProb sequence_logprob(const PolicyModel& model, std::span<const int> input,
                                 std::span<const int> target);

/// Key/value-cached forward pass for autoregressive inference. Produces the
/// same logits as PolicyModel::logits without building a graph.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const PolicyModel& model);
  /// Appends a token and returns the logits for the next position.
  std::vector<double> push(int token);
  int length() const noexcept { return length_; }

 private:
  const PolicyModel& model_;
  int length_ = 0;
  std::vector<std::vector<double>> keys_;    // per layer, length x d
  std::vector<std::vector<double>> values_;  // per layer, length x d
};

struct SampleOptions {
  double temperature = 1.0;
  int max_len = 64;
  bool greedy = false;
  /// Generation stops (exclusive) at this token; none means run to max_len.
  std::optional<int> eos;
};

struct Sample {
  std::vector<int> tokens;  // without the stop token
  bool stopped = false;     // true when generation ended on opts.eos
};

/// Autoregressive sampling until the stop token, max_len, or a full context.
Sample sample_sequence(const PolicyModel& model, std::span<const int> input, const SampleOptions& opts, Rng& rng);

/// Generated tokens only; see sample_sequence.
std::vector<int> sample_response(const PolicyModel& model, std::span<const int> input, const SampleOptions& opts,
                                 Rng& rng);

/// Checkpoint kind "policy".
void save_policy(const std::filesystem::path& path, const PolicyModel& model);
PolicyModel load_policy(const std::filesystem::path& path);

}  // namespace prefalign::nn
