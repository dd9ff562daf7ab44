#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace prefalign::nn {

class ParameterSet;

/// Optimization settings shared by the SFT, density-model and preference
/// stages. Defaults are the SFT stage settings (10 epochs, batch 16, lr 1e-4).
struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

/// Adam with decoupled weight decay over a flat parameter vector.
class AdamW {
 public:
  AdamW(std::size_t n, const TrainConfig& cfg);
  /// Applies one update in place; `grad` is the loss gradient (descent).
  void step(std::span<double> params, std::span<const double> grad);
  long steps() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

double l2_norm(std::span<const double> v);
/// Rescales `grad` so its L2 norm is at most max_norm; returns the norm before clipping.
double clip_grad_norm(std::span<double> grad, double max_norm);

}  // namespace prefalign::nn
