#include "prefalign/cvae/trans_cvae.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "prefalign/common/error.hpp"
#include "prefalign/nn/checkpoint.hpp"

namespace prefalign::cvae {

using namespace prefalign::nn;

void TransCVAEConfig::validate() const {
  if (vocab_size <= 0 || d_model <= 0 || n_heads <= 0 || n_layers < 0 || d_ff <= 0 || latent_dim <= 0 ||
      max_seq_len <= 0 || head_hidden < 0) {
    throw ValidationError("trans-cvae config: sizes must be positive");
  }
  if (d_model % n_heads != 0) throw ValidationError("trans-cvae config: d_model must be divisible by n_heads");
  if (!(logvar_bound > 0.0)) throw ValidationError("trans-cvae config: logvar_bound must be positive");
  if (!(init_std > 0.0)) throw ValidationError("trans-cvae config: init_std must be positive");
}

nlohmann::json TransCVAEConfig::to_json() const {
  return {{"vocab_size", vocab_size},   {"d_model", d_model},         {"n_heads", n_heads},
          {"n_layers", n_layers},       {"d_ff", d_ff},               {"latent_dim", latent_dim},
          {"head_hidden", head_hidden}, {"max_seq_len", max_seq_len}, {"logvar_bound", logvar_bound},
          {"init_std", init_std},       {"tie_posterior", tie_posterior}};
}

TransCVAEConfig TransCVAEConfig::from_json(const nlohmann::json& j) {
  TransCVAEConfig c;
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.latent_dim = j.value("latent_dim", c.latent_dim);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
  c.logvar_bound = j.value("logvar_bound", c.logvar_bound);
  c.init_std = j.value("init_std", c.init_std);
  c.tie_posterior = j.value("tie_posterior", c.tie_posterior);
  c.validate();
  return c;
}

TransCVAE::TransCVAE(const TransCVAEConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.d_model, dz = config_.latent_dim;
  const int hidden = config_.head_hidden > 0 ? config_.head_hidden : d;
  const double s = config_.init_std;
  const double out_s = s / std::sqrt(2.0 * std::max(1, config_.n_layers));
  // The extra row is the start-of-response token fed to the prior at t = 0.
  tok_emb_ = params_.add("tok_emb", config_.vocab_size + 1, d);
  init_normal(tok_emb_, s, rng);
  pos_emb_ = params_.add("pos_emb", config_.max_seq_len, d);
  init_normal(pos_emb_, s, rng);
  for (int l = 0; l < config_.n_layers; ++l) {
    encoder_.emplace_back(params_, "encoder" + std::to_string(l), d, config_.n_heads, config_.d_ff, false, s, out_s,
                          rng);
  }
  enc_norm_ = LayerNorm(params_, "encoder_norm", d);
  for (int l = 0; l < config_.n_layers; ++l) {
    prior_.emplace_back(params_, "prior" + std::to_string(l), d, config_.n_heads, config_.d_ff, true, s, out_s, rng);
  }
  prior_norm_ = LayerNorm(params_, "prior_norm", d);
  prior_head_ = Mlp3(params_, "prior_head", d, hidden, 2 * dz, s, rng);
  if (!config_.tie_posterior) {
    for (int l = 0; l < config_.n_layers; ++l) {
      posterior_.emplace_back(params_, "posterior" + std::to_string(l), d, config_.n_heads, config_.d_ff, true, s,
                              out_s, rng);
    }
    post_norm_ = LayerNorm(params_, "posterior_norm", d);
    post_head_ = Mlp3(params_, "posterior_head", d, hidden, 2 * dz, s, rng);
  }
  decoder_ = Mlp3(params_, "decoder", d + dz, hidden, config_.vocab_size, s, rng);
}

TransCVAE TransCVAE::clone() const {
  TransCVAE copy(config_, 0);
  copy.params_.assign(params_.flatten());
  return copy;
}

Tensor TransCVAE::embed(std::span<const int> tokens) const {
  std::vector<int> pos(tokens.size());
  std::iota(pos.begin(), pos.end(), 0);
  return add(embedding(tok_emb_, tokens), embedding(pos_emb_, pos));
}

std::pair<Tensor, Tensor> TransCVAE::gaussian_head(const Mlp3& head, const Tensor& h) const {
  const int dz = config_.latent_dim;
  const double b = config_.logvar_bound;
  Tensor out = head(h);
  return {slice_cols(out, 0, dz), scale(tanh(scale(slice_cols(out, dz, dz), 1.0 / b)), b)};
}

CvaeForward TransCVAE::forward(std::span<const int> cond, std::span<const int> y) const {
  const int t = static_cast<int>(y.size());
  if (cond.empty()) throw ValidationError("trans-cvae: condition must be non-empty");
  if (static_cast<int>(cond.size()) > config_.max_seq_len || t > config_.max_seq_len) {
    throw ValidationError("trans-cvae: sequence length exceeds max_seq_len " + std::to_string(config_.max_seq_len));
  }
  for (int tok : cond) {
    if (tok < 0 || tok >= config_.vocab_size) throw ValidationError("trans-cvae: token out of range");
  }
  for (int tok : y) {
    if (tok < 0 || tok >= config_.vocab_size) throw ValidationError("trans-cvae: token out of range");
  }

  Tensor memory = embed(cond);
  for (const auto& blk : encoder_) memory = blk.forward(memory, /*causal=*/false);
  memory = enc_norm_(memory);

  std::vector<int> shifted;
  shifted.reserve(t);
  shifted.push_back(config_.vocab_size);
  shifted.insert(shifted.end(), y.begin(), y.end() - 1);
  Tensor hp = embed(shifted);
  for (const auto& blk : prior_) hp = blk.forward(hp, /*causal=*/true, &memory);
  hp = prior_norm_(hp);

  CvaeForward out;
  out.h_prior = hp;
  std::tie(out.prior_mu, out.prior_logvar) = gaussian_head(prior_head_, hp);
  if (config_.tie_posterior) {
    out.post_mu = out.prior_mu;
    out.post_logvar = out.prior_logvar;
  } else {
    Tensor hq = embed(y);
    for (const auto& blk : posterior_) hq = blk.forward(hq, /*causal=*/false, &memory);
    hq = post_norm_(hq);
    std::tie(out.post_mu, out.post_logvar) = gaussian_head(post_head_, hq);
  }
  return out;
}

Tensor TransCVAE::decode(const Tensor& h_prior, const Tensor& z) const { return decoder_(concat_cols(h_prior, z)); }

double gaussian_kl(std::span<const double> mu_q, std::span<const double> var_q, std::span<const double> mu_p,
                   std::span<const double> var_p) {
  const std::size_t n = mu_q.size();
  if (var_q.size() != n || mu_p.size() != n || var_p.size() != n) throw ValidationError("gaussian_kl: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(var_q[i] > 0.0) || !(var_p[i] > 0.0)) throw ValidationError("gaussian_kl: variances must be positive");
    const double dm = mu_q[i] - mu_p[i];
    kl += 0.5 * (std::log(var_p[i] / var_q[i]) + (var_q[i] + dm * dm) / var_p[i] - 1.0);
  }
  return kl;
}

const GaussHermite& gauss_hermite(int n) {
  if (n < 1) throw ValidationError("gauss_hermite: need at least one node");
  static std::mutex mu;
  static std::map<int, GaussHermite> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  // Golub-Welsch: eigenvalues of the symmetric Jacobi matrix are the nodes.
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jac(k, k - 1) = jac(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jac);
  GaussHermite gh;
  gh.nodes.resize(n);
  gh.weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int k = 0; k < n; ++k) {
    gh.nodes[k] = es.eigenvalues()(k);
    const double v0 = es.eigenvectors()(0, k);
    gh.weights[k] = sqrt_pi * v0 * v0;
  }
  return cache.emplace(n, std::move(gh)).first->second;
}

namespace {

Tensor kl_term(const CvaeForward& f) {
  // 0.5 * sum(lv_p - lv_q + exp(lv_q - lv_p) + (mu_q - mu_p)^2 / exp(lv_p) - 1)
  Tensor dlv = sub(f.post_logvar, f.prior_logvar);
  Tensor dm = sub(f.post_mu, f.prior_mu);
  Tensor quad = mul(square(dm), exp(neg(f.prior_logvar)));
  Tensor inner = add_scalar(add(sub(exp(dlv), dlv), quad), -1.0);
  return scale(sum(inner), 0.5);
}

}  // namespace

ElboResult elbo(const TransCVAE& model, std::span<const int> cond, std::span<const int> y, Rng& rng,
                const ElboOptions& opts) {
  const int t = static_cast<int>(y.size());
  const int dz = model.config().latent_dim;
  ElboResult res;
  res.length = t;
  if (t == 0) {
    if (static_cast<int>(cond.size()) > model.config().max_seq_len) {
      throw ValidationError("trans-cvae: sequence length exceeds max_seq_len");
    }
    res.value = res.recon = res.kl = Tensor::scalar(0.0);
    return res;
  }
  CvaeForward f = model.forward(cond, y);
  Tensor sd = exp(scale(f.post_logvar, 0.5));

  Tensor recon;
  if (opts.quadrature_nodes > 0) {
    if (dz != 1) throw ValidationError("elbo: quadrature requires latent_dim == 1");
    const auto& gh = gauss_hermite(opts.quadrature_nodes);
    const double sqrt_pi = std::sqrt(M_PI);
    for (int k = 0; k < opts.quadrature_nodes; ++k) {
      Tensor z = add(f.post_mu, scale(sd, std::sqrt(2.0) * gh.nodes[k]));
      Tensor term = scale(sum(log_softmax_pick(model.decode(f.h_prior, z), y)), gh.weights[k] / sqrt_pi);
      recon = recon.defined() ? add(recon, term) : term;
    }
  } else {
    if (opts.samples < 1) throw ValidationError("elbo: samples must be >= 1");
    const std::size_t per = static_cast<std::size_t>(t) * dz;
    if (!opts.noise.empty() && opts.noise.size() != per * opts.samples) {
      throw ValidationError("elbo: frozen noise must hold samples * T * latent_dim values");
    }
    for (int s = 0; s < opts.samples; ++s) {
      std::vector<double> eps(per);
      if (opts.noise.empty()) {
        for (double& e : eps) e = standard_normal(rng);
      } else {
        std::copy_n(opts.noise.begin() + static_cast<std::ptrdiff_t>(s * per), per, eps.begin());
      }
      Tensor z = add(f.post_mu, mul(sd, Tensor::from(t, dz, std::move(eps))));
      Tensor term = scale(sum(log_softmax_pick(model.decode(f.h_prior, z), y)), 1.0 / opts.samples);
      recon = recon.defined() ? add(recon, term) : term;
    }
  }
  res.recon = recon;
  res.kl = kl_term(f);
  res.value = sub(res.recon, res.kl);
  return res;
}

CvaeHistory cvae_train(TransCVAE& model, const std::vector<CvaeExample>& data, const TrainConfig& cfg,
                       const std::function<void(const CvaeStepLog&)>& on_step) {
  cfg.validate();
  CvaeHistory hist;
  if (cfg.epochs == 0) return hist;
  if (data.empty()) throw ValidationError("cvae_train: dataset is empty");
  auto& params = model.params();
  AdamW opt(params.count(), cfg);
  std::vector<std::size_t> order(data.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    stable_shuffle(order, shuffle_rng);
    double epoch_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Rng noise_rng(derive_seed(derive_seed(cfg.seed, "noise"), static_cast<std::uint64_t>(step)));
      params.zero_grad();
      Tensor loss;
      double elbo_sum = 0.0;
      const double inv_b = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const auto& ex = data[order[i]];
        if (ex.response.empty()) throw ValidationError("cvae_train: empty response");
        ElboResult e = elbo(model, ex.cond, ex.response, noise_rng);
        elbo_sum += e.per_token();
        Tensor l = scale(e.value, -inv_b / static_cast<double>(e.length));
        loss = loss.defined() ? add(loss, l) : l;
      }
      const double mean_elbo = elbo_sum * inv_b;
      if (!std::isfinite(mean_elbo)) {
        throw NonFiniteError("cvae_train: non-finite ELBO at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step));
      }
      loss.backward();
      auto grad = params.flat_grad();
      const double gnorm = clip_grad_norm(grad, cfg.grad_clip);
      if (!std::isfinite(gnorm)) throw NonFiniteError("cvae_train: non-finite gradient at step " + std::to_string(step));
      auto flat = params.flatten();
      opt.step(flat, grad);
      params.assign(flat);
      hist.step_elbo.push_back(mean_elbo);
      epoch_sum += mean_elbo;
      ++batches;
      if (on_step) on_step({epoch, step, mean_elbo, gnorm});
      ++step;
    }
    hist.epoch_elbo.push_back(epoch_sum / batches);
  }
  params.zero_grad();
  return hist;
}

void save_cvae(const std::filesystem::path& path, const TransCVAE& model) {
  save_checkpoint(path, "trans-cvae", model.config().to_json(), model.params());
}

TransCVAE load_cvae(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.kind != "trans-cvae") throw ValidationError("expected a trans-cvae checkpoint, found '" + ck.kind + "'");
  TransCVAE model(TransCVAEConfig::from_json(ck.config), 0);
  model.params().assign(ck.values);
  return model;
}

}  // namespace prefalign::cvae
