#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefalign/cvae/trans_cvae.hpp"
#include "prefalign/prefopt/curriculum.hpp"
#include "prefalign/prefopt/dpo.hpp"

namespace prefalign::prefopt {

/// Preference-stage settings. The full-scale defaults (3 epochs, batch 16,
/// lr 1e-6) are far too small a step for desk-scale models; toy runs
/// override the learning rate. beta and lambda defaults are guesses.
struct PrefConfig {
  double beta = 0.1;
  double lambda = 0.1;
  int epochs = 3;
  int batch_size = 16;
  double learning_rate = 1e-6;
  double weight_decay = 0.0;
  double grad_clip = 1.0;
  int samples_per_prompt = 1;
  int max_sample_len = 64;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  bool closed_form_grad = false;  // default path is autodiff
  bool curriculum = true;
  bool raw_prefdist = false;
  /// Moving-average baseline for the REINFORCE term.
  bool baseline = false;
  double baseline_decay = 0.9;
  /// Checkpoint callback cadence in batches; 0 disables.
  int checkpoint_every = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static PrefConfig from_json(const nlohmann::json& j);
};

struct PrefLogEntry {
  int epoch = 0;
  int batch = 0;
  double j_pl = 0.0;  // mean DPO objective (negated loss) over the batch
  double j_cr = 0.0;  // mean ELBO of policy samples; 0 when lambda == 0
  double grad_norm = 0.0;
  double wall_ms = 0.0;
  double prefdist_min = 0.0;
  double prefdist_max = 0.0;

  nlohmann::json to_json() const;
};

struct PrefHooks {
  std::function<void(const PrefLogEntry&)> on_batch;
  /// Receives the current parameters every checkpoint_every batches and the
  /// last good parameters when training aborts.
  std::function<void(const PolicyModel&, int global_batch)> on_checkpoint;
};

struct PrefResult {
  std::vector<PrefLogEntry> log;
  CurriculumPlan plan;
};

/// Curriculum-ordered DPO with the conservatism-relaxing term: each batch
/// ascends J_pl + lambda * J_cr. `density` may be null when lambda == 0.
/// On a non-finite objective, theta is restored to its last good parameters
/// and NonFiniteError is thrown.
PrefResult preftune(PolicyModel& theta, const PolicyModel& ref, const cvae::TransCVAE* density,
                    const std::vector<PrefExample>& pairs, const PrefConfig& cfg, const PrefHooks& hooks = {});

/// preftune without the conservatism-relaxing term.
PrefResult plain_dpo(PolicyModel& theta, const PolicyModel& ref, const std::vector<PrefExample>& pairs,
                     const PrefConfig& cfg, const PrefHooks& hooks = {});

}  // namespace prefalign::prefopt
