#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "oracles.hpp"
#include "prefalign/common/error.hpp"
#include "prefalign/cvae/trans_cvae.hpp"
#include "prefalign/nn/gradcheck.hpp"

using namespace prefalign;
using namespace prefalign::cvae;

namespace {

TransCVAEConfig toy_config(int dz = 2) {
  TransCVAEConfig c;
  c.vocab_size = 7;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 12;
  c.latent_dim = dz;
  c.max_seq_len = 16;
  return c;
}

std::vector<int> tokens(int n, int vocab, Rng& rng) {
  std::vector<int> t(n);
  for (auto& x : t) x = static_cast<int>(rng() % vocab);
  return t;
}

double log_marginal(const TransCVAE& m, const std::vector<int>& cond, const std::vector<int>& y, int nodes) {
  nn::NoGradGuard ng;
  auto f = m.forward(cond, y);
  const auto gh = oracle::gauss_hermite_newton(nodes);
  const int t = static_cast<int>(y.size());
  double total = 0.0;
  std::vector<std::vector<double>> terms(t);
  for (int k = 0; k < nodes; ++k) {
    std::vector<double> z(t);
    for (int i = 0; i < t; ++i) {
      z[i] = f.prior_mu.at(i, 0) + std::sqrt(2.0) * std::exp(0.5 * f.prior_logvar.at(i, 0)) * gh.x[k];
    }
    auto logits = m.decode(f.h_prior, nn::Tensor::from(t, 1, z));
    for (int i = 0; i < t; ++i) {
      std::vector<double> row(logits.cols());
      for (int v = 0; v < logits.cols(); ++v) row[v] = logits.at(i, v);
      const double lp = logits.at(i, y[i]) - oracle::logsumexp(row);
      terms[i].push_back(std::log(gh.w[k] / std::sqrt(M_PI)) + lp);
    }
  }
  for (auto& v : terms) total += oracle::logsumexp(v);
  return total;
}

}  // namespace

TEST_CASE("gaussian_kl closed form") {
  std::vector<double> zero{0.0}, one{1.0};
  CHECK(gaussian_kl(zero, one, zero, one) == 0.0);
  CHECK(gaussian_kl(one, one, zero, one) == doctest::Approx(0.5).epsilon(1e-15));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> mq(3), vq(3), mp(3), vp(3);
    for (int j = 0; j < 3; ++j) {
      mq[j] = standard_normal(rng);
      mp[j] = standard_normal(rng);
      vq[j] = std::exp(standard_normal(rng));
      vp[j] = std::exp(standard_normal(rng));
    }
    CHECK(gaussian_kl(mq, vq, mp, vp) >= 0.0);
  }
  std::vector<double> bad{0.0};
  CHECK_THROWS_AS(gaussian_kl(zero, bad, zero, one), ValidationError);
}

TEST_CASE("Gauss-Hermite rule agrees with the Newton oracle") {
  for (int n : {5, 40, 200}) {
    const auto& a = gauss_hermite(n);
    auto b = oracle::gauss_hermite_newton(n);
    REQUIRE(static_cast<int>(b.x.size()) == n);
    std::sort(b.x.begin(), b.x.end());
    double wsum = 0;
    for (int k = 0; k < n; ++k) {
      CHECK(a.nodes[k] == doctest::Approx(b.x[k]).epsilon(1e-9));
      wsum += a.weights[k];
    }
    CHECK(wsum == doctest::Approx(std::sqrt(M_PI)).epsilon(1e-12));
  }
}

TEST_CASE("elbo edge cases") {
  Rng rng(3);
  TransCVAE m(toy_config(), 1);
  std::vector<int> cond = {1, 2, 3};
  auto e = elbo(m, cond, {}, rng);
  CHECK(e.value.item() == 0.0);

  TransCVAEConfig tied = toy_config();
  tied.tie_posterior = true;
  TransCVAE mt(tied, 2);
  auto y = tokens(5, 7, rng);
  auto et = elbo(mt, cond, y, rng);
  CHECK(et.kl.item() == 0.0);
  CHECK(et.value.item() == et.recon.item());

  std::vector<int> too_long(20, 1);
  CHECK_THROWS_AS(elbo(m, cond, too_long, rng), ValidationError);
  CHECK_THROWS_AS(elbo(m, cond, y, rng, {.quadrature_nodes = 10}), ValidationError);
}

TEST_CASE("prior is causal, posterior sees the whole response") {
  Rng rng(4);
  TransCVAE m(toy_config(), 7);
  std::vector<int> cond = {1, 2};
  auto y = tokens(6, 7, rng);
  auto f = m.forward(cond, y);
  auto y2 = y;
  y2[4] = (y2[4] + 1) % 7;
  auto g = m.forward(cond, y2);
  for (int t = 0; t <= 4; ++t) CHECK(f.prior_mu.at(t, 0) == g.prior_mu.at(t, 0));
  CHECK(f.prior_mu.at(5, 0) != g.prior_mu.at(5, 0));
  CHECK(f.post_mu.at(0, 0) != g.post_mu.at(0, 0));
}

TEST_CASE("kl is unchanged when latent noise is permuted across timesteps") {
  Rng rng(5);
  TransCVAE m(toy_config(2), 8);
  std::vector<int> cond = {3, 1};
  auto y = tokens(4, 7, rng);
  std::vector<double> noise(8), permuted(8);
  for (double& v : noise) v = standard_normal(rng);
  for (int t = 0; t < 4; ++t) {
    for (int j = 0; j < 2; ++j) permuted[t * 2 + j] = noise[((t + 1) % 4) * 2 + j];
  }
  auto a = elbo(m, cond, y, rng, {.noise = noise});
  auto b = elbo(m, cond, y, rng, {.noise = permuted});
  CHECK(a.kl.item() == b.kl.item());
}

TEST_CASE("negative elbo gradient with frozen noise") {
  Rng rng(6);
  for (int trial = 0; trial < 3; ++trial) {
    TransCVAE m(toy_config(2), 30 + trial);
    std::vector<int> cond = tokens(3, 7, rng);
    auto y = tokens(4, 7, rng);
    std::vector<double> noise(8);
    for (double& v : noise) v = standard_normal(rng);
    auto loss = [&] { return nn::neg(elbo(m, cond, y, rng, {.noise = noise}).value); };
    CHECK(nn::grad_check(loss, m.params(), {.max_coords = 300, .seed = 2}).max_rel_error < 1e-6);
  }
}

TEST_CASE("elbo lower-bounds the quadrature log-marginal") {
  Rng rng(7);
  TransCVAEConfig c = toy_config(1);
  c.init_std = 0.4;
  for (int trial = 0; trial < 20; ++trial) {
    TransCVAE m(c, 100 + trial);
    auto cond = tokens(1 + trial % 3, 7, rng);
    auto y = tokens(1 + trial % 4, 7, rng);
    auto e = elbo(m, cond, y, rng, {.quadrature_nodes = 200});
    CHECK(e.value.item() - log_marginal(m, cond, y, 200) <= 1e-6);
  }
}

TEST_CASE("cvae training memorizes, is deterministic, and checkpoints") {
  Rng rng(8);
  TransCVAEConfig c = toy_config(2);
  c.d_model = 16;
  c.d_ff = 32;
  std::vector<CvaeExample> data;
  for (int i = 0; i < 3; ++i) data.push_back({tokens(3, 7, rng), tokens(5, 7, rng)});
  nn::TrainConfig cfg;
  cfg.epochs = 400;
  cfg.batch_size = 3;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;
  TransCVAE m(c, 1);
  auto hist = cvae_train(m, data, cfg);
  CHECK(hist.epoch_elbo.back() >= -0.5);
  CHECK(hist.epoch_elbo.back() > hist.epoch_elbo.front());

  cfg.epochs = 5;
  TransCVAE a(c, 2), b(c, 2);
  cvae_train(a, data, cfg);
  cvae_train(b, data, cfg);
  CHECK(a.params().flatten() == b.params().flatten());

  cfg.epochs = 0;
  auto before = b.params().flatten();
  cvae_train(b, data, cfg);
  CHECK(b.params().flatten() == before);

  auto path = std::filesystem::temp_directory_path() / "prefalign_cvae_test.bin";
  save_cvae(path, m);
  TransCVAE loaded = load_cvae(path);
  CHECK(loaded.config() == m.config());
  CHECK(loaded.params().flatten() == m.params().flatten());
  std::filesystem::remove(path);
}
