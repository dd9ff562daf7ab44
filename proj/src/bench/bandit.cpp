#include "prefalign/bench/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <tuple>

#include "prefalign/common/error.hpp"

namespace prefalign::bench {

namespace {

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void check_shape(const TabularPolicy& a, const TabularPolicy& b) {
  if (a.n_contexts != b.n_contexts || a.n_actions != b.n_actions) throw ValidationError("policy shapes differ");
}

}  // namespace

void DiscreteBandit::validate() const {
  if (n_contexts <= 0 || n_actions <= 0) throw ValidationError("bandit: empty context or response set");
  if (rho.size() != static_cast<std::size_t>(n_contexts)) throw ValidationError("bandit: rho size mismatch");
  if (r_star.size() != static_cast<std::size_t>(n_contexts) * n_actions) {
    throw ValidationError("bandit: reward table size mismatch");
  }
  double s = 0.0;
  for (double v : rho) {
    if (v < 0) throw ValidationError("bandit: negative context probability");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ValidationError("bandit: rho must sum to 1");
  for (double r : r_star) {
    if (!(r >= 0.0 && r <= max_reward)) throw ValidationError("bandit: reward outside [0, R]");
  }
}

TabularPolicy::TabularPolicy(int contexts, int actions, std::vector<double> probs)
    : n_contexts(contexts), n_actions(actions), p(std::move(probs)) {
  if (p.size() != static_cast<std::size_t>(contexts) * actions) throw ValidationError("policy: size mismatch");
}

TabularPolicy TabularPolicy::uniform(int contexts, int actions) {
  return TabularPolicy(contexts, actions,
                       std::vector<double>(static_cast<std::size_t>(contexts) * actions, 1.0 / actions));
}

TabularPolicy TabularPolicy::greedy(int contexts, int actions, std::span<const double> table) {
  std::vector<double> p(static_cast<std::size_t>(contexts) * actions, 0.0);
  for (int x = 0; x < contexts; ++x) {
    auto row = table.subspan(static_cast<std::size_t>(x) * actions, actions);
    p[static_cast<std::size_t>(x) * actions + (std::max_element(row.begin(), row.end()) - row.begin())] = 1.0;
  }
  return TabularPolicy(contexts, actions, std::move(p));
}

void TabularPolicy::validate(double tol) const {
  for (int x = 0; x < n_contexts; ++x) {
    double s = 0.0;
    for (double v : row(x)) {
      if (!(v >= 0.0)) throw ValidationError("policy: negative or NaN probability");
      s += v;
    }
    if (std::abs(s - 1.0) > tol) throw ValidationError("policy: row " + std::to_string(x) + " does not sum to 1");
  }
}

double total_variation(const TabularPolicy& a, const TabularPolicy& b) {
  check_shape(a, b);
  double worst = 0.0;
  for (int x = 0; x < a.n_contexts; ++x) {
    double s = 0.0;
    for (int y = 0; y < a.n_actions; ++y) s += std::abs(a(x, y) - b(x, y));
    worst = std::max(worst, 0.5 * s);
  }
  return worst;
}

double performance(const TabularPolicy& pi, const DiscreteBandit& bandit) {
  if (pi.n_contexts != bandit.n_contexts || pi.n_actions != bandit.n_actions) {
    throw ValidationError("performance: policy and bandit shapes differ");
  }
  double v = 0.0;
  for (int x = 0; x < bandit.n_contexts; ++x) {
    double row = 0.0;
    for (int y = 0; y < bandit.n_actions; ++y) row += pi(x, y) * bandit.reward(x, y);
    v += bandit.rho[x] * row;
  }
  return v;
}

double coverage_coefficient(const TabularPolicy& pi, const TabularPolicy& pi_ref, std::span<const double> rho) {
  check_shape(pi, pi_ref);
  double c = 0.0;
  for (int x = 0; x < pi.n_contexts; ++x) {
    double row = 0.0;
    for (int y = 0; y < pi.n_actions; ++y) {
      if (pi(x, y) <= 0.0) continue;
      if (pi_ref(x, y) <= 0.0) return std::numeric_limits<double>::infinity();
      row += pi(x, y) / pi_ref(x, y);
    }
    c += rho[x] * row;
  }
  return c;
}

double max_coverage(const TabularPolicy& pi_ref, std::span<const double> rho) {
  double c = 0.0;
  for (int x = 0; x < pi_ref.n_contexts; ++x) {
    double m = 0.0;
    for (double v : pi_ref.row(x)) m = std::max(m, v > 0 ? 1.0 / v : std::numeric_limits<double>::infinity());
    c += rho[x] * m;
  }
  return c;
}

int bt_label(double ra, double rb, Rng& rng) {
  if (!std::isfinite(ra) || !std::isfinite(rb)) throw ValidationError("bt_label: rewards must be finite");
  return uniform01(rng) < sigmoid(ra - rb) ? 1 : -1;
}

int bt_label(const DiscreteBandit& bandit, int x, int a, int b, Rng& rng) {
  return bt_label(bandit.reward(x, a), bandit.reward(x, b), rng);
}

MleResult mle_reward(int n_contexts, int n_actions, const std::vector<Preference>& prefs, double max_reward,
                     std::span<const double> init, const MleOptions& opts) {
  if (prefs.empty()) throw ValidationError("mle_reward: empty preference set");
  const std::size_t cells = static_cast<std::size_t>(n_contexts) * n_actions;
  if (init.size() != cells) throw ValidationError("mle_reward: init size mismatch");

  // Aggregate identical comparisons: (cell a, cell b) -> wins of a, wins of b.
  std::map<std::pair<std::size_t, std::size_t>, std::pair<double, double>> counts;
  std::vector<double> degree(cells, 0.0);
  for (const auto& p : prefs) {
    if (p.x < 0 || p.x >= n_contexts || p.a < 0 || p.a >= n_actions || p.b < 0 || p.b >= n_actions) {
      throw ValidationError("mle_reward: preference index out of range");
    }
    if (p.label != 1 && p.label != -1) throw ValidationError("mle_reward: label must be +1 or -1");
    const std::size_t ca = static_cast<std::size_t>(p.x) * n_actions + p.a;
    const std::size_t cb = static_cast<std::size_t>(p.x) * n_actions + p.b;
    degree[ca] += 1.0;
    degree[cb] += 1.0;
    if (ca == cb) continue;
    auto& c = counts[{std::min(ca, cb), std::max(ca, cb)}];
    const bool first_won = (p.label == 1) == (ca < cb);
    (first_won ? c.first : c.second) += 1.0;
  }
  struct Edge {
    std::size_t i, j;
    double wi, wj;
  };
  std::vector<Edge> edges;
  for (const auto& [k, v] : counts) edges.push_back({k.first, k.second, v.first, v.second});

  MleResult res;
  res.reward.assign(init.begin(), init.end());
  for (double& r : res.reward) r = std::clamp(r, 0.0, max_reward);
  const double lip = 0.5 * *std::max_element(degree.begin(), degree.end());
  if (edges.empty() || lip <= 0.0) {
    res.converged = true;
    return res;
  }
  std::vector<double> grad(cells);
  auto& r = res.reward;
  for (res.iterations = 0; res.iterations < opts.max_iterations; ++res.iterations) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& e : edges) {
      // d/dr_i [wi log s(ri - rj) + wj log s(rj - ri)] = wi s(rj - ri) - wj s(ri - rj)
      const double d = r[e.i] - r[e.j];
      const double g = e.wi * sigmoid(-d) - e.wj * sigmoid(d);
      grad[e.i] += g;
      grad[e.j] -= g;
    }
    double pg = 0.0;
    for (std::size_t k = 0; k < cells; ++k) {
      const double next = std::clamp(r[k] + grad[k] / lip, 0.0, max_reward);
      pg = std::max(pg, std::abs(next - r[k]) * lip);
      r[k] = next;
    }
    res.projected_gradient = pg;
    if (pg < opts.tolerance) {
      res.converged = true;
      ++res.iterations;
      break;
    }
  }
  return res;
}

TabularPolicy dpo_closed_form(std::span<const double> r_hat, const TabularPolicy& pi_ref, double beta) {
  if (!(beta > 0.0)) throw ValidationError("dpo_closed_form: beta must be positive");
  const int xs = pi_ref.n_contexts, ys = pi_ref.n_actions;
  if (r_hat.size() != static_cast<std::size_t>(xs) * ys) throw ValidationError("dpo_closed_form: size mismatch");
  std::vector<double> p(r_hat.size(), 0.0);
  std::vector<double> lg(ys);
  for (int x = 0; x < xs; ++x) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < ys; ++y) {
      const double q = pi_ref(x, y);
      lg[y] = q > 0 ? std::log(q) + r_hat[x * ys + y] / beta : -std::numeric_limits<double>::infinity();
      mx = std::max(mx, lg[y]);
    }
    double z = 0.0;
    for (int y = 0; y < ys; ++y) z += lg[y] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lg[y] - mx);
    for (int y = 0; y < ys; ++y) {
      p[x * ys + y] = lg[y] == -std::numeric_limits<double>::infinity() ? 0.0 : std::exp(lg[y] - mx) / z;
    }
  }
  return TabularPolicy(xs, ys, std::move(p));
}

double theoretical_objective_row(std::span<const double> pi, std::span<const double> r_hat,
                                 std::span<const double> pi_ref, double beta, double lambda) {
  double j = 0.0;
  for (std::size_t y = 0; y < pi.size(); ++y) {
    if (pi[y] <= 0.0) continue;
    if (pi_ref[y] <= 0.0) return -std::numeric_limits<double>::infinity();
    j += pi[y] * (r_hat[y] - beta * std::log(pi[y] / pi_ref[y]) - lambda / pi_ref[y]);
  }
  return j;
}

ObjectiveResult optimize_theoretical_objective(std::span<const double> r_hat, const TabularPolicy& pi_ref,
                                               std::span<const double> rho, double beta, double lambda,
                                               const ObjectiveOptions& opts) {
  if (!(beta > 0.0)) throw ValidationError("optimize_theoretical_objective: beta must be positive");
  if (!(lambda >= 0.0)) throw ValidationError("optimize_theoretical_objective: lambda must be >= 0");
  const int xs = pi_ref.n_contexts, ys = pi_ref.n_actions;
  if (r_hat.size() != static_cast<std::size_t>(xs) * ys || rho.size() != static_cast<std::size_t>(xs)) {
    throw ValidationError("optimize_theoretical_objective: size mismatch");
  }
  const double eta = opts.step_beta / beta;
  const double ninf = -std::numeric_limits<double>::infinity();
  ObjectiveResult res;
  std::vector<double> out(r_hat.size(), 0.0);

  for (int x = 0; x < xs; ++x) {
    std::vector<int> support;
    std::vector<double> log_ref, utility;
    for (int y = 0; y < ys; ++y) {
      if (pi_ref(x, y) > 0.0) {
        support.push_back(y);
        log_ref.push_back(std::log(pi_ref(x, y)));
        utility.push_back(r_hat[x * ys + y] - lambda / pi_ref(x, y));
      }
    }
    const std::size_t k = support.size();
    if (k == 0) throw ValidationError("optimize_theoretical_objective: reference row has no support");
    // Start from pi_ref; iterate log pi <- log pi + eta * dJ/dpi, renormalized.
    std::vector<double> lp = log_ref;
    std::vector<double> g(k);
    double residual = 0.0;
    int it = 0;
    for (;; ++it) {
      double mean_g = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        g[i] = utility[i] - beta * (lp[i] - log_ref[i] + 1.0);
        mean_g += std::exp(lp[i]) * g[i];
      }
      residual = 0.0;
      for (std::size_t i = 0; i < k; ++i) residual = std::max(residual, std::abs(g[i] - mean_g));
      if (residual < opts.tolerance) break;
      if (it >= opts.max_iterations) {
        throw Error("optimize_theoretical_objective: no convergence in context " + std::to_string(x) +
                    ", KKT residual " + std::to_string(residual));
      }
      double mx = ninf;
      for (std::size_t i = 0; i < k; ++i) {
        lp[i] += eta * g[i];
        mx = std::max(mx, lp[i]);
      }
      double z = 0.0;
      for (std::size_t i = 0; i < k; ++i) z += std::exp(lp[i] - mx);
      const double lz = mx + std::log(z);
      for (std::size_t i = 0; i < k; ++i) lp[i] -= lz;
    }
    res.iterations = std::max(res.iterations, it);
    res.kkt_residual = std::max(res.kkt_residual, residual);
    for (std::size_t i = 0; i < k; ++i) out[x * ys + support[i]] = std::exp(lp[i]);
  }
  res.policy = TabularPolicy(xs, ys, std::move(out));
  return res;
}

}  // namespace prefalign::bench
