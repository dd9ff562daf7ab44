#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "prefalign/common/random.hpp"
#include "prefalign/nn/layers.hpp"
#include "prefalign/nn/optim.hpp"

namespace prefalign::cvae {

using nn::Tensor;

struct TransCVAEConfig {
  int vocab_size = 260;
  int d_model = 32;
  int n_heads = 4;
  int n_layers = 1;
  int d_ff = 64;
  int latent_dim = 8;
  int head_hidden = 0;  // 0 = d_model
  int max_seq_len = 256;
  /// log-variances are 8*tanh(pre/8), a smooth clamp to [-8, 8]
  double logvar_bound = 8.0;
  double init_std = 0.02;
  /// Posterior reuses the prior network, so q == p and the KL vanishes.
  bool tie_posterior = false;

  void validate() const;
  nlohmann::json to_json() const;
  static TransCVAEConfig from_json(const nlohmann::json& j);
  bool operator==(const TransCVAEConfig&) const = default;
};

/// Per-timestep quantities of one forward pass. All tensors have T rows.
struct CvaeForward {
  Tensor h_prior;      // T x d, depends on cond and y_<t only
  Tensor prior_mu;     // T x dz
  Tensor prior_logvar;
  Tensor post_mu;
  Tensor post_logvar;
};

/// Transformer conditional VAE over responses y given a condition sequence
/// (review plus context). Latents z_t are per timestep and independent
/// across t under the prior.
class TransCVAE {
 public:
  TransCVAE(const TransCVAEConfig& config, std::uint64_t seed);
  TransCVAE(TransCVAE&&) noexcept = default;
  TransCVAE& operator=(TransCVAE&&) noexcept = default;
  TransCVAE(const TransCVAE&) = delete;
  TransCVAE& operator=(const TransCVAE&) = delete;

  TransCVAE clone() const;

  CvaeForward forward(std::span<const int> cond, std::span<const int> y) const;
  /// Token logits from prior states and latents (T x d, T x dz) -> T x V.
  Tensor decode(const Tensor& h_prior, const Tensor& z) const;

  const TransCVAEConfig& config() const noexcept { return config_; }
  nn::ParameterSet& params() noexcept { return params_; }
  const nn::ParameterSet& params() const noexcept { return params_; }

 private:
  Tensor embed(std::span<const int> tokens) const;
  std::pair<Tensor, Tensor> gaussian_head(const nn::Mlp3& head, const Tensor& h) const;

  TransCVAEConfig config_;
  nn::ParameterSet params_;
  Tensor tok_emb_, pos_emb_;
  std::vector<nn::TransformerBlock> encoder_, prior_, posterior_;
  nn::LayerNorm enc_norm_, prior_norm_, post_norm_;
  nn::Mlp3 prior_head_, post_head_, decoder_;
};

/// KL(N(mu_q, var_q) || N(mu_p, var_p)) for diagonal Gaussians.
double gaussian_kl(std::span<const double> mu_q, std::span<const double> var_q, std::span<const double> mu_p,
                   std::span<const double> var_p);

struct ElboOptions {
  /// Reparameterized draws per timestep for the reconstruction term.
  int samples = 1;
  /// Frozen standard-normal noise, samples x T x dz in row-major order.
  /// When empty, noise is drawn from the generator.
  std::span<const double> noise = {};
  /// Gauss-Hermite nodes for an exact reconstruction expectation (latent_dim
  /// must be 1). Zero selects Monte-Carlo sampling.
  int quadrature_nodes = 0;
};

struct ElboResult {
  Tensor value;  // recon - kl, summed over timesteps
  Tensor recon;
  Tensor kl;
  int length = 0;
  double per_token() const { return length == 0 ? 0.0 : value.item() / length; }
};

/// Timestep-wise evidence lower bound on log p(y | cond).
ElboResult elbo(const TransCVAE& model, std::span<const int> cond, std::span<const int> y, Rng& rng,
                const ElboOptions& opts = {});

/// Physicists' Gauss-Hermite rule: sum_k w_k f(x_k) ~ int exp(-x^2) f(x) dx.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussHermite& gauss_hermite(int n);

struct CvaeExample {
  std::vector<int> cond;
  std::vector<int> response;
};

struct CvaeStepLog {
  int epoch = 0;
  int step = 0;
  double elbo_per_token = 0.0;
  double grad_norm = 0.0;
};

struct CvaeHistory {
  std::vector<double> step_elbo;   // mean per-token ELBO of each batch
  std::vector<double> epoch_elbo;
};

/// Maximizes the mean per-token ELBO with AdamW.
CvaeHistory cvae_train(TransCVAE& model, const std::vector<CvaeExample>& data, const nn::TrainConfig& cfg,
                       const std::function<void(const CvaeStepLog&)>& on_step = {});

void save_cvae(const std::filesystem::path& path, const TransCVAE& model);
TransCVAE load_cvae(const std::filesystem::path& path);

}  // namespace prefalign::cvae
