#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "prefalign/common/error.hpp"
#include "prefalign/nn/checkpoint.hpp"
#include "prefalign/nn/gradcheck.hpp"
#include "prefalign/nn/ops.hpp"
#include "prefalign/nn/policy.hpp"
#include "prefalign/nn/sft.hpp"
#include "prefalign/nn/tokenizer.hpp"

using namespace prefalign;
using namespace prefalign::nn;

namespace {

TransformerConfig tiny_config(int vocab = 12) {
  TransformerConfig c;
  c.vocab_size = vocab;
  c.d_model = 8;
  c.n_heads = 2;
  c.n_layers = 1;
  c.d_ff = 12;
  c.max_seq_len = 24;
  return c;
}

std::vector<int> random_tokens(int n, int vocab, Rng& rng) {
  std::vector<int> t(n);
  for (auto& x : t) x = static_cast<int>(rng() % vocab);
  return t;
}

}  // namespace

TEST_CASE("tokenizer round trip and specials") {
  ByteTokenizer tok;
  const std::string s = "Caf\xc3\xa9 & spa, room 6.\n";
  CHECK(tok.decode(tok.encode(s)) == s);
  auto p = tok.encode_prompt("ab");
  REQUIRE(p.size() == 4);
  CHECK(p.front() == ByteTokenizer::kBos);
  CHECK(p.back() == ByteTokenizer::kSep);
  auto r = tok.encode_response("ab");
  CHECK(r.back() == ByteTokenizer::kEos);
  CHECK(tok.decode(r) == "ab");
}

TEST_CASE("op gradients match finite differences") {
  Rng rng(3);
  ParameterSet ps;
  Tensor a = ps.add("a", 3, 4), b = ps.add("b", 4, 3), g = ps.add("g", 1, 4), bias = ps.add("bias", 1, 4);
  Tensor q = ps.add("q", 4, 4);
  for (auto* t : {&a, &b, &g, &bias, &q}) init_normal(*t, 0.7, rng);
  std::vector<int> targets = {1, -1, 3};

  SUBCASE("matmul, gelu, tanh, log_sigmoid") {
    auto loss = [&] { return sum(log_sigmoid(tanh(gelu(matmul(a, b))))); };
    CHECK(grad_check(loss, ps).max_rel_error < 1e-7);
  }
  SUBCASE("layer norm and log-softmax pick") {
    auto loss = [&] { return sum(log_softmax_pick(layer_norm(a, g, bias), targets)); };
    CHECK(grad_check(loss, ps).max_rel_error < 1e-7);
  }
  SUBCASE("causal attention with slices and concat") {
    auto loss = [&] {
      Tensor x = concat_cols(slice_cols(q, 0, 2), slice_cols(q, 2, 2));
      Tensor y = attention(x, q, square(q), 2, true);
      return mean(exp(scale(slice_rows(y, 1, 3), 0.5)));
    };
    CHECK(grad_check(loss, ps).max_rel_error < 1e-7);
  }
  SUBCASE("cross attention, mul, sub, add_row, log") {
    auto loss = [&] {
      Tensor y = attention(a, q, q, 4, false);
      return sum(log(add_scalar(square(sub(mul(y, y), add_row(a, g))), 1.0)));
    };
    CHECK(grad_check(loss, ps).max_rel_error < 1e-7);
  }
}

TEST_CASE("grad_check on the quadratic") {
  std::vector<double> x = {0.3, -1.7, 4.0, 1e-3, 25.0};
  auto f = [](std::span<const double> p) {
    double s = 0;
    for (double v : p) s += 0.5 * v * v;
    return s;
  };
  auto g = [](std::span<const double> p) { return std::vector<double>(p.begin(), p.end()); };
  CHECK(grad_check(f, g, x).max_rel_error < 1e-8);
  CHECK_THROWS_AS(grad_check(f, g, x, {.epsilon = 1e-2}), ValidationError);
}

TEST_CASE("policy outputs are normalized and causal") {
  Rng rng(11);
  PolicyModel m(tiny_config(), 5);
  auto toks = random_tokens(10, 12, rng);
  Tensor logits = m.logits(toks);
  for (int t = 0; t < logits.rows(); ++t) {
    std::span<const double> row(logits.values().data() + t * logits.cols(), logits.cols());
    auto p = softmax_row(row);
    CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  for (int j = 0; j < 10; ++j) {
    auto flipped = toks;
    flipped[j] = (flipped[j] + 1) % 12;
    Tensor l2 = m.logits(flipped);
    for (int t = 0; t < j; ++t) {
      for (int c = 0; c < 12; ++c) REQUIRE(l2.at(t, c) == logits.at(t, c));
    }
    bool changed = false;
    for (int c = 0; c < 12; ++c) changed |= l2.at(j, c) != logits.at(j, c);
    CHECK(changed);
  }
}

TEST_CASE("sequence_logprob under uniform logits") {
  PolicyModel m(tiny_config(4), 1);
  m.force_output_bias(std::vector<double>(4, 0.0));
  std::vector<int> in = {0, 1}, tgt = {2, 3, 1};
  auto lp = sequence_logprob(m, in, tgt);
  CHECK(lp.value() == doctest::Approx(3 * std::log(0.25)).epsilon(1e-12));
  CHECK(lp.value() == doctest::Approx(-4.1589).epsilon(1e-4));
  double s = 0;
  for (double v : lp.per_token.values()) s += v;
  CHECK(std::abs(s - lp.value()) < 1e-9);

  auto empty = sequence_logprob(m, in, {});
  CHECK(empty.value() == 0.0);
  CHECK(empty.per_token.size() == 0);

  std::vector<int> longer(30, 1);
  CHECK_THROWS_AS(sequence_logprob(m, in, longer), ValidationError);
}

TEST_CASE("incremental decoder reproduces full logits") {
  Rng rng(2);
  TransformerConfig c = tiny_config();
  c.n_layers = 2;
  PolicyModel m(c, 9);
  auto toks = random_tokens(15, 12, rng);
  Tensor full = m.logits(toks);
  IncrementalDecoder dec(m);
  for (int t = 0; t < 15; ++t) {
    auto row = dec.push(toks[t]);
    for (int v = 0; v < 12; ++v) REQUIRE(row[v] == doctest::Approx(full.at(t, v)).epsilon(1e-12));
  }
}

TEST_CASE("sampling") {
  PolicyModel m(tiny_config(), 4);
  std::vector<int> in = {1, 2, 3};
  SampleOptions opt;
  opt.max_len = 8;
  Rng r1(7), r2(7);
  CHECK(sample_response(m, in, opt, r1) == sample_response(m, in, opt, r2));

  opt.greedy = true;
  Rng r3(1), r4(99);
  CHECK(sample_response(m, in, opt, r3) == sample_response(m, in, opt, r4));

  std::vector<double> bias(12, -50.0);
  bias[5] = 50.0;
  m.force_output_bias(bias);
  opt.greedy = false;
  opt.eos = 5;
  Rng r5(3);
  auto s = sample_sequence(m, in, opt, r5);
  CHECK(s.tokens.empty());
  CHECK(s.stopped);
  CHECK_THROWS_AS(sample_response(m, in, SampleOptions{.temperature = 0.0}, r5), ValidationError);
}

TEST_CASE("checkpoint round trip") {
  PolicyModel m(tiny_config(), 21);
  auto path = std::filesystem::temp_directory_path() / "prefalign_ckpt_test.bin";
  save_checkpoint(path, "policy", m.config().to_json(), m.params());
  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.kind == "policy");
  CHECK(TransformerConfig::from_json(ck.config) == m.config());
  CHECK(ck.values == m.params().flatten());

  std::string bytes = encode_checkpoint("policy", m.config().to_json(), ck.values);
  CHECK(bytes.substr(0, 5) == "PALN1");
  CHECK(bytes.size() == 5 + 4 + (bytes.size() - 9 - 8 - 8 * ck.values.size()) + 8 + 8 * ck.values.size());
  CHECK_THROWS_AS(decode_checkpoint("PALN2" + bytes.substr(5)), Error);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), Error);
  std::filesystem::remove(path);
}

TEST_CASE("sft gradient check on two samples") {
  Rng rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    PolicyModel m(tiny_config(), 100 + trial);
    std::vector<SftExample> data = {{random_tokens(4, 12, rng), random_tokens(5, 12, rng)},
                                    {random_tokens(3, 12, rng), random_tokens(6, 12, rng)}};
    std::vector<const SftExample*> batch = {&data[0], &data[1]};
    auto res = grad_check([&] { return sft_loss(m, batch); }, m.params(), {.max_coords = 300, .seed = 1});
    CHECK(res.max_rel_error < 1e-6);
  }
}

TEST_CASE("sft memorizes a single pair and is deterministic") {
  ByteTokenizer tok;
  TransformerConfig c = tiny_config(ByteTokenizer::kVocabSize);
  c.d_model = 16;
  c.d_ff = 32;
  c.max_seq_len = 32;
  std::vector<SftExample> data = {{tok.encode_prompt("hi"), tok.encode_response("thanks!")}};
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;

  PolicyModel a(c, 1);
  auto hist = sft_train(a, data, cfg);
  CHECK(hist.epoch_losses.back() < 0.05);
  CHECK(hist.epoch_losses.back() < hist.epoch_losses.front());

  cfg.epochs = 20;
  PolicyModel b1(c, 1), b2(c, 1);
  sft_train(b1, data, cfg);
  sft_train(b2, data, cfg);
  CHECK(b1.params().flatten() == b2.params().flatten());

  cfg.epochs = 0;
  PolicyModel z(c, 1);
  auto before = z.params().flatten();
  sft_train(z, data, cfg);
  CHECK(z.params().flatten() == before);
}
