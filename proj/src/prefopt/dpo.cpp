#include "prefalign/prefopt/dpo.hpp"

#include <cmath>

#include "prefalign/common/error.hpp"

namespace prefalign::prefopt {

using namespace prefalign::nn;

namespace {

double seq_logp(const PolicyModel& m, const std::vector<int>& prompt, const std::vector<int>& y) {
  NoGradGuard ng;
  return sequence_logprob(m, prompt, y).value();
}

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

}  // namespace

double pref_dist(const PolicyModel& ref, const PrefExample& pair, bool raw) {
  if (pair.chosen.empty() || pair.rejected.empty()) throw ValidationError("pref_dist: empty response in " + pair.id);
  const double lw = seq_logp(ref, pair.prompt, pair.chosen);
  const double ll = seq_logp(ref, pair.prompt, pair.rejected);
  if (raw) return std::exp(lw) - std::exp(ll);
  return std::exp(lw / static_cast<double>(pair.chosen.size())) -
         std::exp(ll / static_cast<double>(pair.rejected.size()));
}

RefLogProbs reference_logprobs(const PolicyModel& ref, const PrefExample& pair) {
  return {seq_logp(ref, pair.prompt, pair.chosen), seq_logp(ref, pair.prompt, pair.rejected)};
}

Tensor dpo_loss(const PolicyModel& theta, const RefLogProbs& ref, const PrefExample& pair, double beta) {
  if (!(beta > 0.0)) throw ValidationError("dpo_loss: beta must be positive");
  Tensor lw = sequence_logprob(theta, pair.prompt, pair.chosen).total;
  Tensor ll = sequence_logprob(theta, pair.prompt, pair.rejected).total;
  Tensor margin = add_scalar(scale(sub(lw, ll), beta), -beta * (ref.chosen - ref.rejected));
  return neg(log_sigmoid(margin));
}

Tensor dpo_loss(const PolicyModel& theta, const PolicyModel& ref, const PrefExample& pair, double beta) {
  return dpo_loss(theta, reference_logprobs(ref, pair), pair, beta);
}

DpoGradient dpo_grad_closed_form(PolicyModel& theta, const RefLogProbs& ref, const PrefExample& pair, double beta) {
  if (!(beta > 0.0)) throw ValidationError("dpo_grad_closed_form: beta must be positive");
  auto& params = theta.params();

  params.zero_grad();
  Tensor lw = sequence_logprob(theta, pair.prompt, pair.chosen).total;
  lw.backward();
  std::vector<double> gw = params.flat_grad();

  params.zero_grad();
  Tensor ll = sequence_logprob(theta, pair.prompt, pair.rejected).total;
  ll.backward();
  std::vector<double> gl = params.flat_grad();
  params.zero_grad();

  const double rw = lw.item() - ref.chosen;
  const double rl = ll.item() - ref.rejected;
  DpoGradient out;
  out.weight = sigmoid(beta * (rl - rw));
  const double m = beta * (rw - rl);
  out.loss = m >= 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  out.grad.resize(gw.size());
  const double c = -beta * out.weight;
  for (std::size_t i = 0; i < gw.size(); ++i) out.grad[i] = c * (gw[i] - gl[i]);
  return out;
}

DpoGradient dpo_grad_closed_form(PolicyModel& theta, const PolicyModel& ref, const PrefExample& pair, double beta) {
  return dpo_grad_closed_form(theta, reference_logprobs(ref, pair), pair, beta);
}

double preference_accuracy(const PolicyModel& model, const std::vector<PrefExample>& pairs) {
  if (pairs.empty()) return 0.0;
  int wins = 0;
  for (const auto& p : pairs) {
    const double w = seq_logp(model, p.prompt, p.chosen) / static_cast<double>(p.chosen.size());
    const double l = seq_logp(model, p.prompt, p.rejected) / static_cast<double>(p.rejected.size());
    wins += w > l ? 1 : 0;
  }
  return static_cast<double>(wins) / static_cast<double>(pairs.size());
}

}  // namespace prefalign::prefopt
