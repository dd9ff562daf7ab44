#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefalign/bench/gap_experiment.hpp"
#include "prefalign/corpus/curate.hpp"
#include "prefalign/cvae/trans_cvae.hpp"
#include "prefalign/nn/optim.hpp"
#include "prefalign/nn/policy.hpp"
#include "prefalign/prefopt/trainer.hpp"

namespace prefalign::cli {

struct AnnotatorSettings {
  bool mock = true;
  std::string endpoint;
  double timeout_s = 30.0;
  int retries = 3;
  int backoff_ms = 500;
  int max_attempts = 3;  // pair regeneration cap
};

struct EvalSettings {
  std::string embedding = "hash";  // hash | lm | file
  int embedding_dim = 64;
  std::string embedding_index;  // file provider only
  std::string embedding_data;
  double baseline = 0.0;
  int max_new_tokens = 200;
  bool greedy = true;
  double temperature = 1.0;
  int bootstrap_resamples = 10000;
};

struct RunConfig {
  std::uint64_t seed = 0;

  std::filesystem::path run_dir = "run";
  std::filesystem::path corpus;  // reviews.jsonl; defaults to <run_dir>/reviews.jsonl
  int toy_reviews = 200;         // make-toy stage

  corpus::CurationConfig curation;
  AnnotatorSettings annotator;
  nn::TransformerConfig model;
  cvae::TransCVAEConfig cvae_model;
  nn::TrainConfig sft;
  nn::TrainConfig cvae_train;
  prefopt::PrefConfig pref;
  EvalSettings eval;
  bench::ExperimentSpec bench;
  std::filesystem::path bench_dir;  // defaults to <run_dir>/theorybench

  /// Full-scale defaults with a desk-sized model.
  RunConfig();

  std::filesystem::path corpus_path() const;
  std::filesystem::path path(const std::string& relative) const { return run_dir / relative; }

  /// Applies one "section.key" assignment; throws ValidationError for an
  /// unknown key or an unparsable value.
  void set(const std::string& key, const std::string& value);
  /// Every settable key with its current value rendered as text.
  std::map<std::string, std::string> values() const;
  void validate() const;
  nlohmann::json to_json() const;
};

/// TOML-style file: `key = value` lines under `[section]` headers.
RunConfig load_config(const std::filesystem::path& path);
void apply_config_text(RunConfig& cfg, const std::string& text);

}  // namespace prefalign::cli
