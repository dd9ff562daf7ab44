#include "prefalign/nn/optim.hpp"

#include <cmath>

#include "prefalign/common/error.hpp"

namespace prefalign::nn {

void TrainConfig::validate() const {
  if (epochs < 0 || batch_size <= 0 || !(learning_rate > 0.0) || !(grad_clip > 0.0) || weight_decay < 0.0) {
    throw ValidationError("train config: epochs >= 0, batch_size > 0, learning_rate > 0, grad_clip > 0 required");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},       {"batch_size", batch_size},     {"learning_rate", learning_rate},
          {"beta1", beta1},         {"beta2", beta2},               {"adam_eps", adam_eps},
          {"weight_decay", weight_decay}, {"grad_clip", grad_clip}, {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

AdamW::AdamW(std::size_t n, const TrainConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) {}

void AdamW::step(std::span<double> params, std::span<const double> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw Error("AdamW::step: size mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= cfg_.learning_rate * (mhat / (std::sqrt(vhat) + cfg_.adam_eps) + cfg_.weight_decay * params[i]);
  }
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double clip_grad_norm(std::span<double> grad, double max_norm) {
  const double norm = l2_norm(grad);
  if (norm > max_norm && norm > 0.0) {
    const double k = max_norm / norm;
    for (double& g : grad) g *= k;
  }
  return norm;
}

}  // namespace prefalign::nn
