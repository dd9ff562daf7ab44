#include "prefalign/prefopt/reinforce.hpp"

#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"

namespace prefalign::prefopt {

using namespace prefalign::nn;

std::vector<int> draw_response(const PolicyModel& theta, const std::vector<int>& prompt, const SampleOptions& opts,
                               Rng& rng) {
  Sample s = sample_sequence(theta, prompt, opts, rng);
  if (s.stopped) s.tokens.push_back(*opts.eos);
  return s.tokens;
}

std::vector<double> score_function_term(PolicyModel& theta, const std::vector<int>& prompt,
                                        const std::vector<int>& response, double weight) {
  auto& params = theta.params();
  params.zero_grad();
  if (!response.empty()) scale(sequence_logprob(theta, prompt, response).total, weight).backward();
  auto g = params.flat_grad();
  params.zero_grad();
  return g;
}

ScoreFunctionEstimate reinforce_gradient(PolicyModel& theta, const std::vector<std::vector<int>>& prompts,
                                         int n_samples, const SequenceScore& f, const SampleOptions& opts, Rng& rng,
                                         double baseline) {
  if (n_samples < 1) throw ValidationError("reinforce_gradient: n_samples must be >= 1");
  auto& params = theta.params();
  ScoreFunctionEstimate est;
  if (prompts.empty()) {
    est.grad.assign(params.count(), 0.0);
    return est;
  }
  const double inv = 1.0 / (static_cast<double>(prompts.size()) * n_samples);
  params.zero_grad();
  Tensor surrogate;
  double total = 0.0;
  for (const auto& prompt : prompts) {
    for (int s = 0; s < n_samples; ++s) {
      std::vector<int> y = draw_response(theta, prompt, opts, rng);
      const double score = f(prompt, y);
      est.scores.push_back(score);
      total += score;
      if (!y.empty()) {
        Tensor term = scale(sequence_logprob(theta, prompt, y).total, (score - baseline) * inv);
        surrogate = surrogate.defined() ? add(surrogate, term) : term;
      }
      est.responses.push_back(std::move(y));
    }
  }
  if (surrogate.defined()) surrogate.backward();
  est.grad = params.flat_grad();
  params.zero_grad();
  est.mean_score = total * inv;
  return est;
}

SequenceScore elbo_score(const cvae::TransCVAE& density, Rng& rng) {
  return [&density, &rng](const std::vector<int>& prompt, const std::vector<int>& response) {
    NoGradGuard ng;
    return cvae::elbo(density, prompt, response, rng).value.item();
  };
}

double cr_estimate(const PolicyModel& theta, const cvae::TransCVAE& density,
                   const std::vector<std::vector<int>>& prompts, int n_samples, const SampleOptions& opts,
                   Rng& rng) {
  if (n_samples < 1) throw ValidationError("cr_estimate: n_samples must be >= 1");
  if (prompts.empty()) {
    log_warn("cr_estimate: no prompts given, returning 0");
    return 0.0;
  }
  auto f = elbo_score(density, rng);
  double total = 0.0;
  for (const auto& prompt : prompts) {
    for (int s = 0; s < n_samples; ++s) total += f(prompt, draw_response(theta, prompt, opts, rng));
  }
  return total / (static_cast<double>(prompts.size()) * n_samples);
}

ScoreFunctionEstimate cr_grad_reinforce(PolicyModel& theta, const cvae::TransCVAE& density,
                                        const std::vector<std::vector<int>>& prompts, int n_samples,
                                        const SampleOptions& opts, Rng& rng, double baseline) {
  return reinforce_gradient(theta, prompts, n_samples, elbo_score(density, rng), opts, rng, baseline);
}

}  // namespace prefalign::prefopt
