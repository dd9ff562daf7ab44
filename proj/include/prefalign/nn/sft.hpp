#pragma once

#include <functional>
#include <vector>

#include "prefalign/nn/optim.hpp"
#include "prefalign/nn/policy.hpp"

namespace prefalign::nn {

struct SftExample {
  std::vector<int> prompt;    // conditioning tokens (BOS ... SEP)
  std::vector<int> response;  // target tokens (... EOS)
};

struct StepLog {
  int epoch = 0;
  int step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
};

struct TrainHistory {
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
};

/// Mean over examples of the per-token negative log-likelihood of the response.
Tensor sft_loss(const PolicyModel& model, const std::vector<const SftExample*>& batch);

/// Next-token maximum-likelihood training on (prompt, response) pairs.
TrainHistory sft_train(PolicyModel& model, const std::vector<SftExample>& data, const TrainConfig& cfg,
                       const std::function<void(const StepLog&)>& on_step = {});

}  // namespace prefalign::nn
