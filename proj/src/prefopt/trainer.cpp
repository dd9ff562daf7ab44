#include "prefalign/prefopt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "prefalign/common/error.hpp"
#include "prefalign/nn/optim.hpp"
#include "prefalign/nn/tokenizer.hpp"
#include "prefalign/prefopt/reinforce.hpp"

namespace prefalign::prefopt {

using namespace prefalign::nn;

void PrefConfig::validate() const {
  if (!(beta > 0.0)) throw ValidationError("pref config: beta must be > 0");
  if (!(lambda >= 0.0)) throw ValidationError("pref config: lambda must be >= 0");
  if (epochs < 0) throw ValidationError("pref config: epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("pref config: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("pref config: learning_rate must be > 0");
  if (samples_per_prompt < 1) throw ValidationError("pref config: samples_per_prompt must be >= 1");
  if (max_sample_len < 1) throw ValidationError("pref config: max_sample_len must be >= 1");
  if (!(temperature > 0.0)) throw ValidationError("pref config: temperature must be > 0");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) throw ValidationError("pref config: baseline_decay in [0,1)");
  if (checkpoint_every < 0) throw ValidationError("pref config: checkpoint_every must be >= 0");
}

nlohmann::json PrefConfig::to_json() const {
  return {{"beta", beta},
          {"lambda", lambda},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"weight_decay", weight_decay},
          {"grad_clip", grad_clip},
          {"samples_per_prompt", samples_per_prompt},
          {"max_sample_len", max_sample_len},
          {"temperature", temperature},
          {"seed", seed},
          {"closed_form_grad", closed_form_grad},
          {"curriculum", curriculum},
          {"raw_prefdist", raw_prefdist},
          {"baseline", baseline},
          {"baseline_decay", baseline_decay},
          {"checkpoint_every", checkpoint_every}};
}

PrefConfig PrefConfig::from_json(const nlohmann::json& j) {
  PrefConfig c;
  c.beta = j.value("beta", c.beta);
  c.lambda = j.value("lambda", c.lambda);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.grad_clip = j.value("grad_clip", c.grad_clip);
  c.samples_per_prompt = j.value("samples_per_prompt", c.samples_per_prompt);
  c.max_sample_len = j.value("max_sample_len", c.max_sample_len);
  c.temperature = j.value("temperature", c.temperature);
  c.seed = j.value("seed", c.seed);
  c.closed_form_grad = j.value("closed_form_grad", c.closed_form_grad);
  c.curriculum = j.value("curriculum", c.curriculum);
  c.raw_prefdist = j.value("raw_prefdist", c.raw_prefdist);
  c.baseline = j.value("baseline", c.baseline);
  c.baseline_decay = j.value("baseline_decay", c.baseline_decay);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.validate();
  return c;
}

nlohmann::json PrefLogEntry::to_json() const {
  return {{"epoch", epoch},         {"batch", batch},       {"j_pl", j_pl},
          {"j_cr", j_cr},           {"grad_norm", grad_norm}, {"wall_ms", wall_ms},
          {"prefdist_min", prefdist_min}, {"prefdist_max", prefdist_max}};
}

PrefResult preftune(PolicyModel& theta, const PolicyModel& ref, const cvae::TransCVAE* density,
                    const std::vector<PrefExample>& pairs, const PrefConfig& cfg, const PrefHooks& hooks) {
  cfg.validate();
  if (cfg.lambda > 0.0 && density == nullptr) throw ValidationError("preftune: lambda > 0 needs a density model");
  if (!(theta.config() == ref.config())) throw ValidationError("preftune: policy and reference configs differ");

  PrefResult result;
  result.plan = cfg.curriculum ? curriculum_order(pairs, ref, cfg.batch_size, cfg.seed, cfg.raw_prefdist)
                               : random_order(pairs, cfg.batch_size, cfg.seed);
  if (cfg.epochs == 0 || pairs.empty()) return result;

  std::vector<RefLogProbs> ref_lp;
  ref_lp.reserve(pairs.size());
  for (const auto& p : pairs) ref_lp.push_back(reference_logprobs(ref, p));

  auto& params = theta.params();
  TrainConfig opt_cfg;
  opt_cfg.learning_rate = cfg.learning_rate;
  opt_cfg.weight_decay = cfg.weight_decay;
  opt_cfg.grad_clip = cfg.grad_clip;
  AdamW opt(params.count(), opt_cfg);

  SampleOptions sample_opts;
  sample_opts.temperature = cfg.temperature;
  sample_opts.max_len = cfg.max_sample_len;
  sample_opts.eos = ByteTokenizer::kEos;

  std::vector<double> last_good = params.flatten();
  double baseline = 0.0;
  bool baseline_init = false;
  int global_batch = 0;

  auto abort_with = [&](const std::string& why) {
    params.assign(last_good);
    params.zero_grad();
    if (hooks.on_checkpoint) hooks.on_checkpoint(theta, global_batch);
    throw NonFiniteError(why);
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto batches = result.plan.epoch_batches(epoch);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto& batch = batches[bi];
      const double inv_b = 1.0 / static_cast<double>(batch.size());

      std::vector<double> grad;
      double loss_sum = 0.0;
      if (cfg.closed_form_grad) {
        grad.assign(params.count(), 0.0);
        for (std::size_t i : batch) {
          DpoGradient g = dpo_grad_closed_form(theta, ref_lp[i], pairs[i], cfg.beta);
          loss_sum += g.loss;
          for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += g.grad[k] * inv_b;
        }
      } else {
        params.zero_grad();
        Tensor loss;
        for (std::size_t i : batch) {
          Tensor l = scale(dpo_loss(theta, ref_lp[i], pairs[i], cfg.beta), inv_b);
          loss = loss.defined() ? add(loss, l) : l;
        }
        loss_sum = loss.item() / inv_b;
        loss.backward();
        grad = params.flat_grad();
        params.zero_grad();
      }
      const double j_pl = -loss_sum * inv_b;
      if (!std::isfinite(j_pl)) {
        abort_with("preftune: non-finite DPO objective at epoch " + std::to_string(epoch) + " batch " +
                   std::to_string(bi));
      }

      double j_cr = 0.0;
      if (cfg.lambda > 0.0) {
        Rng rng(derive_seed(derive_seed(cfg.seed, "cr"), static_cast<std::uint64_t>(global_batch)));
        std::vector<std::vector<int>> prompts;
        for (std::size_t i : batch) prompts.push_back(pairs[i].prompt);
        auto est = cr_grad_reinforce(theta, *density, prompts, cfg.samples_per_prompt, sample_opts, rng,
                                     cfg.baseline && baseline_init ? baseline : 0.0);
        j_cr = est.mean_score;
        if (!std::isfinite(j_cr)) {
          abort_with("preftune: non-finite ELBO at epoch " + std::to_string(epoch) + " batch " + std::to_string(bi));
        }
        // Minimize -(J_pl + lambda J_cr): add -lambda * grad J_cr.
        for (std::size_t k = 0; k < grad.size(); ++k) grad[k] -= cfg.lambda * est.grad[k];
        if (cfg.baseline) {
          baseline = baseline_init ? cfg.baseline_decay * baseline + (1.0 - cfg.baseline_decay) * j_cr : j_cr;
          baseline_init = true;
        }
      }

      const double gnorm = clip_grad_norm(grad, cfg.grad_clip);
      if (!std::isfinite(gnorm)) {
        abort_with("preftune: non-finite gradient at epoch " + std::to_string(epoch) + " batch " +
                   std::to_string(bi));
      }
      auto flat = params.flatten();
      opt.step(flat, grad);
      params.assign(flat);
      last_good = std::move(flat);

      PrefLogEntry entry;
      entry.epoch = epoch;
      entry.batch = static_cast<int>(bi);
      entry.j_pl = j_pl;
      entry.j_cr = j_cr;
      entry.grad_norm = gnorm;
      entry.prefdist_min = 1e300;
      entry.prefdist_max = -1e300;
      for (std::size_t i : batch) {
        entry.prefdist_min = std::min(entry.prefdist_min, result.plan.dist(i));
        entry.prefdist_max = std::max(entry.prefdist_max, result.plan.dist(i));
      }
      entry.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      result.log.push_back(entry);
      if (hooks.on_batch) hooks.on_batch(entry);
      ++global_batch;
      if (cfg.checkpoint_every > 0 && global_batch % cfg.checkpoint_every == 0 && hooks.on_checkpoint) {
        hooks.on_checkpoint(theta, global_batch);
      }
    }
  }
  return result;
}

PrefResult plain_dpo(PolicyModel& theta, const PolicyModel& ref, const std::vector<PrefExample>& pairs,
                     const PrefConfig& cfg, const PrefHooks& hooks) {
  PrefConfig c = cfg;
  c.lambda = 0.0;
  return preftune(theta, ref, nullptr, pairs, c, hooks);
}

}  // namespace prefalign::prefopt
