#pragma once

#include <span>
#include <vector>

#include "prefalign/common/random.hpp"

namespace prefalign::bench {

/// Finite contexts x finite responses with a known reward table in [0, R].
struct DiscreteBandit {
  int n_contexts = 0;
  int n_actions = 0;
  std::vector<double> rho;     // context distribution
  std::vector<double> r_star;  // n_contexts x n_actions, row-major
  double max_reward = 1.0;

  double reward(int x, int y) const { return r_star[static_cast<std::size_t>(x) * n_actions + y]; }
  void validate() const;
};

/// Conditional distributions over responses, one row per context.
struct TabularPolicy {
  int n_contexts = 0;
  int n_actions = 0;
  std::vector<double> p;

  TabularPolicy() = default;
  TabularPolicy(int contexts, int actions, std::vector<double> probs);
  static TabularPolicy uniform(int contexts, int actions);
  /// Puts all mass on argmax_y table(x, y) (lowest index on ties).
  static TabularPolicy greedy(int contexts, int actions, std::span<const double> table);

  double operator()(int x, int y) const { return p[static_cast<std::size_t>(x) * n_actions + y]; }
  std::span<const double> row(int x) const {
    return {p.data() + static_cast<std::size_t>(x) * n_actions, static_cast<std::size_t>(n_actions)};
  }
  void validate(double tol = 1e-12) const;
};

double total_variation(const TabularPolicy& a, const TabularPolicy& b);

/// V(pi) = sum_x rho(x) sum_y pi(y|x) r*(x,y).
double performance(const TabularPolicy& pi, const DiscreteBandit& bandit);

/// C^pi = sum_x rho(x) sum_y pi(y|x) / pi_ref(y|x); +inf when pi puts mass
/// where pi_ref has none.
double coverage_coefficient(const TabularPolicy& pi, const TabularPolicy& pi_ref, std::span<const double> rho);

/// max over policies of C^pi, attained at a deterministic policy.
double max_coverage(const TabularPolicy& pi_ref, std::span<const double> rho);

struct Preference {
  int x = 0;
  int a = 0;
  int b = 0;
  int label = 1;  // +1: a preferred, -1: b preferred
};

/// Bradley-Terry draw: +1 with probability sigmoid(ra - rb).
int bt_label(double ra, double rb, Rng& rng);
int bt_label(const DiscreteBandit& bandit, int x, int a, int b, Rng& rng);

struct MleOptions {
  double tolerance = 1e-8;  // on the projected-gradient max-norm
  int max_iterations = 500000;
};

struct MleResult {
  std::vector<double> reward;  // n_contexts x n_actions
  int iterations = 0;
  double projected_gradient = 0.0;
  bool converged = false;
};

/// Bradley-Terry maximum likelihood over a tabular reward clipped to
/// [0, max_reward], by projected gradient ascent with step 1/L.
MleResult mle_reward(int n_contexts, int n_actions, const std::vector<Preference>& prefs, double max_reward,
                     std::span<const double> init, const MleOptions& opts = {});

/// pi(y|x) proportional to pi_ref(y|x) exp(r(x,y) / beta).
TabularPolicy dpo_closed_form(std::span<const double> r_hat, const TabularPolicy& pi_ref, double beta);

struct ObjectiveOptions {
  double tolerance = 1e-8;  // KKT residual
  int max_iterations = 100000;
  /// Exponentiated-gradient step times beta; 1 would jump straight to the
  /// fixed point, smaller values damp it.
  double step_beta = 0.5;
};

struct ObjectiveResult {
  TabularPolicy policy;
  int iterations = 0;
  double kkt_residual = 0.0;
};

/// Maximizes J(pi) = E[r_hat] - beta KL(pi || pi_ref) - lambda E_pi[1/pi_ref]
/// context by context with log-space exponentiated gradient. Responses with
/// pi_ref = 0 get no mass.
ObjectiveResult optimize_theoretical_objective(std::span<const double> r_hat, const TabularPolicy& pi_ref,
                                               std::span<const double> rho, double beta, double lambda,
                                               const ObjectiveOptions& opts = {});

/// J(pi) for one context row; used by tests and diagnostics.
double theoretical_objective_row(std::span<const double> pi, std::span<const double> r_hat,
                                 std::span<const double> pi_ref, double beta, double lambda);

}  // namespace prefalign::bench
