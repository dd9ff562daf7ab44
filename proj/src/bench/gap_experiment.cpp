#include "prefalign/bench/gap_experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "prefalign/common/error.hpp"
#include "prefalign/common/stats.hpp"
#include "prefalign/common/svg.hpp"

namespace prefalign::bench {

void ExperimentSpec::validate() const {
  if (n_contexts < 1 || n_actions < 2) throw ValidationError("bench spec: need >= 1 context and >= 2 responses");
  if (!(max_reward > 0.0)) throw ValidationError("bench spec: max_reward must be positive");
  if (sample_sizes.empty() || betas.empty() || lambdas.empty()) throw ValidationError("bench spec: empty grid");
  for (int n : sample_sizes) {
    if (n < 1) throw ValidationError("bench spec: sample sizes must be positive");
  }
  for (double b : betas) {
    if (!(b > 0.0)) throw ValidationError("bench spec: betas must be positive");
  }
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ValidationError("bench spec: lambdas must be positive");
  }
  if (seeds < 1) throw ValidationError("bench spec: seeds must be >= 1");
  if (!(optimal_mass > 0.0 && optimal_mass <= 1.0)) throw ValidationError("bench spec: optimal_mass in (0, 1]");
  if (!(mass_floor >= 0.0 && mass_floor * n_actions < 1.0)) throw ValidationError("bench spec: mass_floor too big");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("bench spec: delta in (0, 1)");
  if (bootstrap_resamples < 1) throw ValidationError("bench spec: bootstrap_resamples must be >= 1");
}

BenchInstance make_instance(const ExperimentSpec& spec, int seed) {
  Rng rng(derive_seed(derive_seed(spec.base_seed, static_cast<std::uint64_t>(seed)), "bandit"));
  const int xs = spec.n_contexts, ys = spec.n_actions;
  BenchInstance inst;
  auto& b = inst.bandit;
  b.n_contexts = xs;
  b.n_actions = ys;
  b.max_reward = spec.max_reward;
  b.rho.assign(xs, 1.0 / xs);
  b.r_star.resize(static_cast<std::size_t>(xs) * ys);
  std::uniform_real_distribution<double> ur(0.0, spec.max_reward);
  for (double& r : b.r_star) r = ur(rng);

  std::vector<double> p(b.r_star.size(), 0.0);
  std::gamma_distribution<double> gamma(spec.dirichlet_alpha > 0 ? spec.dirichlet_alpha : 1.0, 1.0);
  for (int x = 0; x < xs; ++x) {
    auto row = std::span<const double>(b.r_star).subspan(static_cast<std::size_t>(x) * ys, ys);
    const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    std::vector<double> w(ys - 1);
    for (double& v : w) v = spec.dirichlet_alpha > 0 ? gamma(rng) : 1.0;
    const double ws = std::accumulate(w.begin(), w.end(), 0.0);
    double total = 0.0;
    for (int y = 0, k = 0; y < ys; ++y) {
      double& q = p[static_cast<std::size_t>(x) * ys + y];
      q = y == best ? spec.optimal_mass : (1.0 - spec.optimal_mass) * w[k++] / ws;
      q = std::max(q, spec.mass_floor);
      total += q;
    }
    for (int y = 0; y < ys; ++y) p[static_cast<std::size_t>(x) * ys + y] /= total;
  }
  inst.pi_ref = TabularPolicy(xs, ys, std::move(p));
  return inst;
}

std::vector<Preference> draw_preferences(const BenchInstance& inst, int n, Rng& rng) {
  const auto& b = inst.bandit;
  std::vector<Preference> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Preference p;
    p.x = static_cast<int>(sample_categorical(b.rho, rng));
    auto row = inst.pi_ref.row(p.x);
    std::vector<double> w(row.begin(), row.end());
    p.a = static_cast<int>(sample_categorical(w, rng));
    p.b = static_cast<int>(sample_categorical(w, rng));
    p.label = bt_label(b, p.x, p.a, p.b, rng);
    out.push_back(p);
  }
  return out;
}

double bound_relaxed(double cov_opt, double beta, double lambda, double max_reward, double log_pi_over_delta, int n) {
  const double k = 1.0 + std::exp(max_reward);
  return k * k * std::sqrt(2.0 * cov_opt * log_pi_over_delta / n) + (beta + lambda) * cov_opt +
         std::pow(k, 4) * log_pi_over_delta / (2.0 * n * lambda);
}

double bound_dpo(double cov_opt, double cov_max, double beta, double max_reward, double log_pi_over_delta, int n) {
  const double k = 1.0 + std::exp(max_reward);
  return 2.0 * std::sqrt((cov_opt + cov_max) * std::pow(k, 4) * log_pi_over_delta / n) + beta * cov_opt;
}

GapRow run_seed(const ExperimentSpec& spec, int seed, int n, double beta) {
  return run_instance(spec, make_instance(spec, seed), seed, n, beta);
}

GapRow run_instance(const ExperimentSpec& spec, const BenchInstance& inst, int seed, int n, double beta) {
  const auto& b = inst.bandit;
  const std::uint64_t s = derive_seed(spec.base_seed, static_cast<std::uint64_t>(seed));
  Rng train_rng(derive_seed(derive_seed(s, "train"), static_cast<std::uint64_t>(n)));
  Rng holdout_rng(derive_seed(derive_seed(s, "holdout"), static_cast<std::uint64_t>(n)));
  const std::vector<double> init(b.r_star.size(), 0.5 * b.max_reward);
  const auto fit = mle_reward(b.n_contexts, b.n_actions, draw_preferences(inst, n, train_rng), b.max_reward, init);
  const auto held = mle_reward(b.n_contexts, b.n_actions, draw_preferences(inst, n, holdout_rng), b.max_reward, init);

  const TabularPolicy pi_star = TabularPolicy::greedy(b.n_contexts, b.n_actions, b.r_star);
  const double v_star = performance(pi_star, b);

  GapRow row;
  row.seed = seed;
  row.n = n;
  row.beta = beta;
  row.gap_dpo = v_star - performance(dpo_closed_form(fit.reward, inst.pi_ref, beta), b);

  DiscreteBandit held_bandit = b;
  held_bandit.r_star = held.reward;
  double best_value = -1e300;
  for (double lambda : spec.lambdas) {
    auto cand = optimize_theoretical_objective(fit.reward, inst.pi_ref, b.rho, beta, lambda).policy;
    const double v = performance(cand, held_bandit);
    if (v > best_value) {
      best_value = v;
      row.lambda = lambda;
      row.gap_ours = v_star - performance(cand, b);
    }
  }

  row.cov_opt = coverage_coefficient(pi_star, inst.pi_ref, b.rho);
  row.cov_max = max_coverage(inst.pi_ref, b.rho);
  const double log_term = b.n_contexts * std::log(static_cast<double>(b.n_actions)) - std::log(spec.delta);
  row.bound_ours = bound_relaxed(row.cov_opt, beta, row.lambda, b.max_reward, log_term, n);
  row.bound_dpo = bound_dpo(row.cov_opt, row.cov_max, beta, b.max_reward, log_term, n);
  return row;
}

const GapSummary& GapReport::summary(int n, double beta) const {
  for (const auto& s : summaries) {
    if (s.n == n && s.beta == beta) return s;
  }
  throw Error("gap report has no summary for n=" + std::to_string(n));
}

GapReport gap_experiment(const ExperimentSpec& spec) {
  spec.validate();
  GapReport report;
  report.log_policy_class = spec.n_contexts * std::log(static_cast<double>(spec.n_actions));
  for (int n : spec.sample_sizes) {
    for (double beta : spec.betas) {
      std::vector<double> gd, go;
      GapSummary sum;
      sum.n = n;
      sum.beta = beta;
      int better = 0;
      for (int seed = 0; seed < spec.seeds; ++seed) {
        GapRow row = run_seed(spec, seed, n, beta);
        gd.push_back(row.gap_dpo);
        go.push_back(row.gap_ours);
        better += row.gap_ours < row.gap_dpo ? 1 : 0;
        sum.ours_bound_ok += row.ours_within_bound() ? 1 : 0;
        sum.dpo_bound_ok += row.dpo_within_bound() ? 1 : 0;
        report.rows.push_back(row);
      }
      sum.rows = spec.seeds;
      sum.mean_gap_dpo = mean(gd);
      sum.mean_gap_ours = mean(go);
      sum.ours_better_fraction = static_cast<double>(better) / spec.seeds;
      sum.p_value = paired_bootstrap_pvalue(gd, go, spec.bootstrap_resamples,
                                            derive_seed(spec.base_seed, "bootstrap"));
      report.summaries.push_back(sum);
    }
  }
  return report;
}

void write_gap_csv(const GapReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "seed,n,beta,lambda,gap_dpo,gap_ours,cov_opt,cov_max,bound_relaxed,bound_dpo\n";
  for (const auto& r : report.rows) {
    out << r.seed << ',' << r.n << ',' << r.beta << ',' << r.lambda << ',' << r.gap_dpo << ',' << r.gap_ours << ','
        << r.cov_opt << ',' << r.cov_max << ',' << r.bound_ours << ',' << r.bound_dpo << '\n';
  }
}

void write_gap_summary_csv(const GapReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "n,beta,seeds,mean_gap_dpo,mean_gap_ours,ours_better_fraction,bootstrap_p,bound_ok_ours,bound_ok_dpo\n";
  for (const auto& s : report.summaries) {
    out << s.n << ',' << s.beta << ',' << s.rows << ',' << s.mean_gap_dpo << ',' << s.mean_gap_ours << ','
        << s.ours_better_fraction << ',' << s.p_value << ',' << s.ours_bound_ok << ',' << s.dpo_bound_ok << '\n';
  }
}

void write_gap_svg(const GapReport& report, const std::filesystem::path& path, int n, double beta) {
  Series dpo{"DPO (lambda = 0)", {}, {}, "#d62728"};
  Series ours{"relaxed (selected lambda)", {}, {}, "#1f77b4"};
  for (const auto& r : report.rows) {
    if (r.n != n || r.beta != beta) continue;
    dpo.x.push_back(r.cov_opt);
    dpo.y.push_back(r.gap_dpo);
    ours.x.push_back(r.cov_opt);
    ours.y.push_back(r.gap_ours);
  }
  PlotSpec spec;
  std::ostringstream title;
  title << "Performance gap vs coverage (n = " << n << ", beta = " << beta << ")";
  spec.title = title.str();
  spec.x_label = "C^{pi*} = E_{pi*}[1 / pi_ref]";
  spec.y_label = "V(pi*) - V(pi_hat)";
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << render_svg(spec, {dpo, ours});
}

}  // namespace prefalign::bench
