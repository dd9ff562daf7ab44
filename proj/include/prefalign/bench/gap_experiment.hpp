#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "prefalign/bench/bandit.hpp"

namespace prefalign::bench {

/// Suite of random bandits with a deliberately suboptimal reference policy.
struct ExperimentSpec {
  int n_contexts = 4;
  int n_actions = 6;
  double max_reward = 2.0;
  std::vector<int> sample_sizes = {50, 200, 1000};
  int seeds = 50;
  std::uint64_t base_seed = 0;
  std::vector<double> betas = {0.05, 0.1, 0.5};
  std::vector<double> lambdas = {0.0005, 0.001, 0.003, 0.01, 0.03};
  /// Reference mass on the optimal response; the rest is split over the
  /// other responses by a symmetric Dirichlet draw.
  double optimal_mass = 0.2;
  double dirichlet_alpha = 1.0;  // <= 0 splits the remainder evenly
  double mass_floor = 1e-3;      // reference masses are floored, then renormalized
  double delta = 0.05;           // confidence level inside log(|Pi| / delta)
  int bootstrap_resamples = 10000;

  void validate() const;
};


/// One random bandit and its reference policy for a seed.
struct BenchInstance {
  DiscreteBandit bandit;
  TabularPolicy pi_ref;
};
BenchInstance make_instance(const ExperimentSpec& spec, int seed);

/// n preferences with both responses drawn from pi_ref(.|x), x ~ rho.
std::vector<Preference> draw_preferences(const BenchInstance& inst, int n, Rng& rng);

struct GapRow {
  int seed = 0;
  int n = 0;
  double beta = 0.0;
  double lambda = 0.0;  // chosen for the relaxed objective
  double gap_dpo = 0.0;
  double gap_ours = 0.0;
  double cov_opt = 0.0;  // C^{pi*}
  double cov_max = 0.0;  // max_pi C^pi
  double bound_ours = 0.0;
  double bound_dpo = 0.0;
  bool ours_within_bound() const { return gap_ours <= bound_ours; }
  bool dpo_within_bound() const { return gap_dpo <= bound_dpo; }
};

struct GapSummary {
  int n = 0;
  double beta = 0.0;
  int rows = 0;
  double mean_gap_dpo = 0.0;
  double mean_gap_ours = 0.0;
  double ours_better_fraction = 0.0;
  double p_value = 1.0;  // paired bootstrap, two-sided
  int ours_bound_ok = 0;
  int dpo_bound_ok = 0;
};

struct GapReport {
  std::vector<GapRow> rows;
  std::vector<GapSummary> summaries;
  double log_policy_class = 0.0;  // log |Pi| with |Pi| = |Y|^|X|

  const GapSummary& summary(int n, double beta) const;
};

/// Bound for the relaxed objective at coverage C^{pi*}.
double bound_relaxed(double cov_opt, double beta, double lambda, double max_reward, double log_pi_over_delta, int n);
/// Bound for DPO with single- and all-policy coverage.
double bound_dpo(double cov_opt, double cov_max, double beta, double max_reward, double log_pi_over_delta, int n);

GapRow run_seed(const ExperimentSpec& spec, int seed, int n, double beta);
/// Same as run_seed on a caller-supplied instance.
GapRow run_instance(const ExperimentSpec& spec, const BenchInstance& inst, int seed, int n, double beta);
GapReport gap_experiment(const ExperimentSpec& spec);

void write_gap_csv(const GapReport& report, const std::filesystem::path& path);
void write_gap_summary_csv(const GapReport& report, const std::filesystem::path& path);
void write_gap_svg(const GapReport& report, const std::filesystem::path& path, int n, double beta);

}  // namespace prefalign::bench
