#pragma once

#include <functional>
#include <vector>

#include "prefalign/cvae/trans_cvae.hpp"
#include "prefalign/nn/policy.hpp"

namespace prefalign::prefopt {

using nn::PolicyModel;

/// Scalar score f(x, y) of a sampled response.
using SequenceScore = std::function<double(const std::vector<int>& prompt, const std::vector<int>& response)>;

struct ScoreFunctionEstimate {
  /// mean over draws of grad log pi(y|x) * (f(x,y) - baseline)
  std::vector<double> grad;
  double mean_score = 0.0;
  std::vector<double> scores;  // one per draw, prompt-major
  std::vector<std::vector<int>> responses;
};

/// Draws a response and returns the tokens whose probability was realized:
/// the generated tokens plus the stop token when sampling stopped on it.
std::vector<int> draw_response(const PolicyModel& theta, const std::vector<int>& prompt,
                               const nn::SampleOptions& opts, Rng& rng);

/// grad log pi(response | prompt) * weight.
std::vector<double> score_function_term(PolicyModel& theta, const std::vector<int>& prompt,
                                        const std::vector<int>& response, double weight);

/// Score-function (REINFORCE) estimate of grad E_{y~pi}[f(x, y)], averaged
/// over prompts, with n_samples draws per prompt.
ScoreFunctionEstimate reinforce_gradient(PolicyModel& theta, const std::vector<std::vector<int>>& prompts,
                                         int n_samples, const SequenceScore& f, const nn::SampleOptions& opts,
                                         Rng& rng, double baseline = 0.0);

/// f(x, y) = ELBO of y under the density model, one reparameterized draw.
SequenceScore elbo_score(const cvae::TransCVAE& density, Rng& rng);

/// Monte-Carlo estimate of E_{y~pi_theta}[log p(y|x,c)] using the ELBO.
/// Empty prompt lists give 0 and a warning.
double cr_estimate(const PolicyModel& theta, const cvae::TransCVAE& density,
                   const std::vector<std::vector<int>>& prompts, int n_samples, const nn::SampleOptions& opts,
                   Rng& rng);

/// REINFORCE gradient of the conservatism-relaxing term.
ScoreFunctionEstimate cr_grad_reinforce(PolicyModel& theta, const cvae::TransCVAE& density,
                                        const std::vector<std::vector<int>>& prompts, int n_samples,
                                        const nn::SampleOptions& opts, Rng& rng, double baseline = 0.0);

}  // namespace prefalign::prefopt
