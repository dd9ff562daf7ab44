#include "prefalign/nn/sft.hpp"

#include <cmath>
#include <numeric>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"

namespace prefalign::nn {

Tensor sft_loss(const PolicyModel& model, const std::vector<const SftExample*>& batch) {
  if (batch.empty()) throw ValidationError("sft_loss: empty batch");
  Tensor total;
  for (const SftExample* ex : batch) {
    if (ex->response.empty()) throw ValidationError("sft_loss: empty response");
    auto lp = sequence_logprob(model, ex->prompt, ex->response);
    Tensor nll = scale(lp.total, -1.0 / (static_cast<double>(ex->response.size()) * batch.size()));
    total = total.defined() ? add(total, nll) : nll;
  }
  return total;
}

TrainHistory sft_train(PolicyModel& model, const std::vector<SftExample>& data, const TrainConfig& cfg,
                       const std::function<void(const StepLog&)>& on_step) {
  cfg.validate();
  TrainHistory hist;
  if (cfg.epochs == 0) return hist;
  if (data.empty()) throw ValidationError("sft_train: dataset is empty");

  auto& params = model.params();
  AdamW opt(params.count(), cfg);
  std::vector<std::size_t> order(data.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    stable_shuffle(order, rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const SftExample*> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) batch.push_back(&data[order[i]]);
      params.zero_grad();
      Tensor loss = sft_loss(model, batch);
      const double lv = loss.item();
      if (!std::isfinite(lv)) {
        throw NonFiniteError("sft_train: non-finite loss at epoch " + std::to_string(epoch) + " step " +
                             std::to_string(step));
      }
      loss.backward();
      auto grad = params.flat_grad();
      const double gnorm = clip_grad_norm(grad, cfg.grad_clip);
      if (!std::isfinite(gnorm)) throw NonFiniteError("sft_train: non-finite gradient at step " + std::to_string(step));
      auto flat = params.flatten();
      opt.step(flat, grad);
      params.assign(flat);
      hist.step_losses.push_back(lv);
      epoch_loss += lv;
      ++batches;
      if (on_step) on_step({epoch, step, lv, gnorm});
      ++step;
    }
    hist.epoch_losses.push_back(epoch_loss / batches);
  }
  params.zero_grad();
  return hist;
}

}  // namespace prefalign::nn
