#pragma once

#include <string>
#include <vector>

#include "prefalign/nn/policy.hpp"

namespace prefalign::prefopt {

using nn::PolicyModel;
using nn::Tensor;

/// One tokenized preference pair. `prompt` conditions both responses.
struct PrefExample {
  std::string id;
  std::vector<int> prompt;
  std::vector<int> chosen;    // y_w
  std::vector<int> rejected;  // y_l
};

/// Per-token likelihood gap exp(logp_w/|y_w|) - exp(logp_l/|y_l|) under the
/// reference model. With `raw` the unnormalized sequence probabilities are
/// used instead, which underflow for all but very short responses.
double pref_dist(const PolicyModel& ref, const PrefExample& pair, bool raw = false);

/// Log-probabilities of both responses under a frozen reference.
struct RefLogProbs {
  double chosen = 0.0;
  double rejected = 0.0;
};
RefLogProbs reference_logprobs(const PolicyModel& ref, const PrefExample& pair);

/// -log sigmoid(beta * ((logpi_w - logref_w) - (logpi_l - logref_l))), 1x1.
Tensor dpo_loss(const PolicyModel& theta, const RefLogProbs& ref, const PrefExample& pair, double beta);
Tensor dpo_loss(const PolicyModel& theta, const PolicyModel& ref, const PrefExample& pair, double beta);

struct DpoGradient {
  std::vector<double> grad;  // gradient of dpo_loss (descent direction is -grad)
  /// sigmoid(beta * (ratio_l - ratio_w)), the per-pair weight.
  double weight = 0.0;
  double loss = 0.0;
};

/// Gradient assembled from the analytic form
///   -beta * sigmoid(beta*(r_l - r_w)) * (grad logpi(y_w) - grad logpi(y_l)).
DpoGradient dpo_grad_closed_form(PolicyModel& theta, const RefLogProbs& ref, const PrefExample& pair, double beta);
DpoGradient dpo_grad_closed_form(PolicyModel& theta, const PolicyModel& ref, const PrefExample& pair, double beta);

/// Fraction of pairs whose chosen response has the higher per-token
/// log-likelihood. Empty input gives 0.
double preference_accuracy(const PolicyModel& model, const std::vector<PrefExample>& pairs);

}  // namespace prefalign::prefopt
