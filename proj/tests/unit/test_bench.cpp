#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "oracles.hpp"
#include "prefalign/bench/bandit.hpp"
#include "prefalign/bench/gap_experiment.hpp"
#include "prefalign/common/error.hpp"

using namespace prefalign;
using namespace prefalign::bench;

namespace {

DiscreteBandit two_by_two() {
  DiscreteBandit b;
  b.n_contexts = 2;
  b.n_actions = 2;
  b.rho = {0.5, 0.5};
  b.r_star = {1, 0, 0, 1};
  b.max_reward = 1;
  return b;
}

TabularPolicy random_policy(int xs, int ys, Rng& rng, double floor = 0.0) {
  std::vector<double> p(static_cast<std::size_t>(xs) * ys);
  for (int x = 0; x < xs; ++x) {
    double s = 0;
    for (int y = 0; y < ys; ++y) s += p[x * ys + y] = floor + uniform01(rng);
    for (int y = 0; y < ys; ++y) p[x * ys + y] /= s;
  }
  return TabularPolicy(xs, ys, std::move(p));
}

}  // namespace

TEST_CASE("performance") {
  auto b = two_by_two();
  CHECK(performance(TabularPolicy::uniform(2, 2), b) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(performance(TabularPolicy::greedy(2, 2, b.r_star), b) == doctest::Approx(1.0));

  DiscreteBandit c;
  c.n_contexts = 3;
  c.n_actions = 4;
  c.rho = {0.2, 0.3, 0.5};
  c.r_star.assign(12, 1.25);
  c.max_reward = 2;
  CHECK(performance(TabularPolicy::uniform(3, 4), c) == doctest::Approx(1.25).epsilon(1e-14));

  Rng rng(3);
  for (double& r : c.r_star) r = 2 * uniform01(rng);
  double best = 0;
  for (int x = 0; x < 3; ++x) best += c.rho[x] * *std::max_element(c.r_star.begin() + 4 * x, c.r_star.begin() + 4 * x + 4);
  CHECK(performance(TabularPolicy::greedy(3, 4, c.r_star), c) == doctest::Approx(best).epsilon(1e-14));
}

TEST_CASE("coverage coefficient") {
  std::vector<double> rho{1.0};
  auto u3 = TabularPolicy::uniform(1, 3);
  CHECK(coverage_coefficient(u3, u3, rho) == doctest::Approx(3.0).epsilon(1e-14));

  TabularPolicy ref(1, 3, {0.1, 0.45, 0.45});
  TabularPolicy point(1, 3, {1, 0, 0});
  CHECK(coverage_coefficient(point, ref, rho) == doctest::Approx(10.0).epsilon(1e-14));

  TabularPolicy holey(1, 3, {0, 0.5, 0.5});
  CHECK(std::isinf(coverage_coefficient(point, holey, rho)));

  // uniform on its support: C = sum_x rho(x) |supp|
  TabularPolicy sup(2, 4, {0.5, 0.5, 0, 0, 0.25, 0.25, 0.25, 0.25});
  std::vector<double> rho2{0.3, 0.7};
  CHECK(coverage_coefficient(sup, sup, rho2) == doctest::Approx(0.3 * 2 + 0.7 * 4).epsilon(1e-14));

  // the maximum over the simplex sits at a vertex
  Rng rng(8);
  auto r = random_policy(2, 4, rng, 0.05);
  const double cmax = max_coverage(r, rho2);
  for (int i = 0; i < 200; ++i) CHECK(coverage_coefficient(random_policy(2, 4, rng), r, rho2) <= cmax + 1e-12);
  double by_hand = 0;
  for (int x = 0; x < 2; ++x) {
    double m = 0;
    for (int y = 0; y < 4; ++y) m = std::max(m, 1.0 / r(x, y));
    by_hand += rho2[x] * m;
  }
  CHECK(cmax == doctest::Approx(by_hand).epsilon(1e-14));
}

TEST_CASE("bradley-terry labels") {
  Rng rng(11);
  int wins = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) wins += bt_label(0.7, 0.7, rng) == 1;
  CHECK(std::abs(wins - n / 2.0) < 3 * std::sqrt(n * 0.25));

  wins = 0;
  for (int i = 0; i < n; ++i) wins += bt_label(std::log(3.0), 0.0, rng) == 1;
  const double sd = std::sqrt(n * 0.75 * 0.25);
  CHECK(std::abs(wins - 0.75 * n) < 3 * sd);

  const double dr = 0.9 - 1.6;
  const double p = oracle::sigmoid(dr);
  wins = 0;
  for (int i = 0; i < n; ++i) wins += bt_label(0.9, 1.6, rng) == 1;
  CHECK(std::abs(wins - p * n) < 3 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("reward MLE") {
  SUBCASE("separable data hits the clamp") {
    std::vector<Preference> prefs(20, Preference{0, 0, 1, 1});
    std::vector<double> init{1, 1};
    auto fit = mle_reward(1, 2, prefs, 2.0, init);
    CHECK(fit.reward[0] - fit.reward[1] == doctest::Approx(2.0).epsilon(1e-12));
  }
  SUBCASE("symmetric data keeps each context constant") {
    std::vector<Preference> prefs{{0, 0, 1, 1}, {0, 0, 1, -1}, {0, 1, 2, 1}, {0, 1, 2, -1}, {0, 0, 2, 1}, {0, 2, 0, 1}};
    std::vector<double> init{0.7, 0.7, 0.7, 1.3, 1.3, 1.3};
    auto fit = mle_reward(2, 3, prefs, 2.0, init);
    CHECK(fit.converged);
    for (int y = 0; y < 3; ++y) {
      CHECK(fit.reward[y] == doctest::Approx(0.7).epsilon(1e-9));
      CHECK(fit.reward[3 + y] == doctest::Approx(1.3).epsilon(1e-12));
    }
  }
  SUBCASE("recovers the centered reward from 10^4 labels") {
    DiscreteBandit b;
    b.n_contexts = 2;
    b.n_actions = 3;
    b.rho = {0.5, 0.5};
    b.r_star = {0.5, 1.0, 1.8, 1.5, 0.2, 0.9};
    b.max_reward = 2;
    Rng rng(5);
    std::vector<Preference> prefs;
    for (int i = 0; i < 10000; ++i) {
      Preference p;
      p.x = static_cast<int>(sample_categorical(b.rho, rng));
      p.a = static_cast<int>(rng() % 3);
      p.b = static_cast<int>(rng() % 3);
      p.label = bt_label(b, p.x, p.a, p.b, rng);
      prefs.push_back(p);
    }
    std::vector<double> init(6, 1.0);
    auto fit = mle_reward(2, 3, prefs, 2.0, init);
    CHECK(fit.converged);
    CHECK(fit.projected_gradient < 1e-8);
    for (int x = 0; x < 2; ++x) {
      double mh = 0, ms = 0;
      for (int y = 0; y < 3; ++y) {
        mh += fit.reward[3 * x + y] / 3;
        ms += b.r_star[3 * x + y] / 3;
      }
      for (int y = 0; y < 3; ++y) {
        CHECK(std::abs((fit.reward[3 * x + y] - mh) - (b.r_star[3 * x + y] - ms)) < 0.1);
      }
    }
  }
  SUBCASE("errors") {
    std::vector<double> init{1, 1};
    CHECK_THROWS_AS(mle_reward(1, 2, {}, 2.0, init), ValidationError);
    CHECK_THROWS_AS(mle_reward(1, 2, {{0, 0, 5, 1}}, 2.0, init), ValidationError);
  }
}

TEST_CASE("closed-form DPO policy") {
  auto u2 = TabularPolicy::uniform(1, 2);
  std::vector<double> r{1, 0};
  auto pi = dpo_closed_form(r, u2, 1.0);
  CHECK(pi(0, 0) == doctest::Approx(std::exp(1.0) / (1 + std::exp(1.0))).epsilon(1e-15));
  CHECK(pi(0, 0) == doctest::Approx(0.731059).epsilon(1e-6));

  Rng rng(2);
  auto ref = random_policy(3, 5, rng, 0.1);
  std::vector<double> rh(15);
  for (double& v : rh) v = 2 * uniform01(rng);
  CHECK(total_variation(dpo_closed_form(rh, ref, 1e6), ref) < 1e-5);
  auto out = dpo_closed_form(rh, ref, 0.3);
  for (int x = 0; x < 3; ++x) {
    double s = 0;
    for (int y = 0; y < 5; ++y) s += out(x, y);
    CHECK(std::abs(s - 1) <= 1e-12);
  }
  std::vector<double> flat(15, 1.4);
  auto same = dpo_closed_form(flat, ref, 0.3);
  for (std::size_t i = 0; i < 15; ++i) CHECK(same.p[i] == doctest::Approx(ref.p[i]).epsilon(1e-15));
  CHECK_THROWS_AS(dpo_closed_form(rh, ref, 0.0), ValidationError);
}

TEST_CASE("relaxed objective with lambda 0 matches the closed form on 1000 instances") {
  Rng rng(17);
  std::uniform_real_distribution<double> logbeta(std::log(0.02), std::log(5.0));
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const int xs = 1 + static_cast<int>(rng() % 4), ys = 2 + static_cast<int>(rng() % 6);
    auto ref = random_policy(xs, ys, rng, 0.02);
    std::vector<double> rh(static_cast<std::size_t>(xs) * ys);
    for (double& v : rh) v = 2 * uniform01(rng);
    std::vector<double> rho(xs, 1.0 / xs);
    const double beta = std::exp(logbeta(rng));
    auto got = optimize_theoretical_objective(rh, ref, rho, beta, 0.0);
    worst = std::max(worst, total_variation(got.policy, dpo_closed_form(rh, ref, beta)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("relaxed objective against a grid search on two responses") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 0.05 + 0.9 * uniform01(rng);
    TabularPolicy ref(1, 2, {a, 1 - a});
    std::vector<double> rh{2 * uniform01(rng), 2 * uniform01(rng)};
    std::vector<double> rho{1.0};
    const double beta = 0.1, lambda = 50.0;
    auto got = optimize_theoretical_objective(rh, ref, rho, beta, lambda);
    CHECK(got.kkt_residual < 1e-8);
    double best_j = -1e300, best_p = 0;
    for (int k = 0; k <= 100; ++k) {
      const double p = k / 100.0;
      std::vector<double> row{p, 1 - p};
      const double j = theoretical_objective_row(row, rh, ref.row(0), beta, lambda);
      if (j > best_j) best_j = j, best_p = p;
    }
    CHECK(std::abs(got.policy(0, 0) - best_p) <= 0.01 + 1e-12);
    CHECK(theoretical_objective_row(got.policy.row(0), rh, ref.row(0), beta, lambda) >= best_j - 1e-12);
    // heavy penalty pushes mass toward the better-covered response
    const int covered = a > 0.5 ? 0 : 1;
    CHECK(got.policy(0, covered) > std::max(a, 1 - a));
  }
}

TEST_CASE("relaxed objective limits and errors") {
  Rng rng(4);
  auto ref = random_policy(2, 4, rng, 0.1);
  std::vector<double> rh(8);
  for (double& v : rh) v = 2 * uniform01(rng);
  std::vector<double> rho{0.5, 0.5};
  CHECK(total_variation(optimize_theoretical_objective(rh, ref, rho, 1e7, 0.3).policy, ref) < 1e-4);
  CHECK_THROWS_AS(optimize_theoretical_objective(rh, ref, rho, 0.0, 0.1), ValidationError);
  CHECK_THROWS_AS(optimize_theoretical_objective(rh, ref, rho, 0.1, -1.0), ValidationError);
  ObjectiveOptions tight;
  tight.max_iterations = 2;
  CHECK_THROWS_AS(optimize_theoretical_objective(rh, ref, rho, 0.1, 0.01, tight), Error);
}

TEST_CASE("sigmoid inverse-Lipschitz inequality on a dense grid") {
  for (double R : {1.0, 2.0, 5.0}) {
    const double k = std::pow(1 + std::exp(R), 2);
    double worst = -1;
    const int m = 201;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double z1 = -R + 2 * R * i / (m - 1), z2 = -R + 2 * R * j / (m - 1);
        const double lhs = std::abs(z1 - z2);
        const double rhs = k * std::abs(oracle::sigmoid(z1) - oracle::sigmoid(z2));
        worst = std::max(worst, lhs - rhs);
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("perfectly covered optimum gives zero gaps") {
  ExperimentSpec spec;
  auto inst = make_instance(spec, 0);
  inst.pi_ref = TabularPolicy::greedy(inst.bandit.n_contexts, inst.bandit.n_actions, inst.bandit.r_star);
  for (int n : {50, 200}) {
    auto row = run_instance(spec, inst, 0, n, 0.1);
    CHECK(std::abs(row.gap_dpo) < 1e-12);
    CHECK(std::abs(row.gap_ours) < 1e-12);
    CHECK(row.cov_opt == doctest::Approx(1.0));
    CHECK(std::isinf(row.cov_max));
  }
}

TEST_CASE("instances follow the spec") {
  ExperimentSpec spec;
  for (int seed = 0; seed < 10; ++seed) {
    auto inst = make_instance(spec, seed);
    inst.bandit.validate();
    inst.pi_ref.validate();
    const auto& b = inst.bandit;
    for (int x = 0; x < b.n_contexts; ++x) {
      auto row = std::span<const double>(b.r_star).subspan(x * b.n_actions, b.n_actions);
      const int best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
      CHECK(inst.pi_ref(x, best) == doctest::Approx(0.2).epsilon(0.01));
      for (int y = 0; y < b.n_actions; ++y) CHECK(inst.pi_ref(x, y) >= 1e-3 * 0.99);
    }
  }
  auto a = make_instance(spec, 3), c = make_instance(spec, 3);
  CHECK(a.bandit.r_star == c.bandit.r_star);
  CHECK(a.pi_ref.p == c.pi_ref.p);
  ExperimentSpec bad = spec;
  bad.lambdas.clear();
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("bound expressions") {
  const double lg = 4 * std::log(6.0) - std::log(0.05);
  const double k = 1 + std::exp(2.0);
  CHECK(bound_relaxed(3.0, 0.1, 0.01, 2.0, lg, 200) ==
        doctest::Approx(k * k * std::sqrt(6 * lg / 200) + 0.11 * 3 + std::pow(k, 4) * lg / 4.0).epsilon(1e-14));
  CHECK(bound_dpo(3.0, 50.0, 0.1, 2.0, lg, 200) ==
        doctest::Approx(2 * std::sqrt(53 * std::pow(k, 4) * lg / 200) + 0.3).epsilon(1e-14));
}

TEST_CASE("small gap experiment writes its report") {
  ExperimentSpec spec;
  spec.sample_sizes = {50};
  spec.betas = {0.1};
  spec.seeds = 4;
  spec.bootstrap_resamples = 500;
  auto rep = gap_experiment(spec);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.log_policy_class == doctest::Approx(4 * std::log(6.0)));
  for (const auto& r : rep.rows) {
    CHECK(r.gap_dpo >= -1e-12);
    CHECK(r.gap_ours >= -1e-12);
    CHECK(r.ours_within_bound());
    CHECK(r.dpo_within_bound());
    CHECK(r.cov_max >= r.cov_opt);
  }
  const auto& s = rep.summary(50, 0.1);
  CHECK(s.rows == 4);
  CHECK_THROWS(rep.summary(51, 0.1));

  auto again = gap_experiment(spec);
  CHECK(again.rows[2].gap_ours == rep.rows[2].gap_ours);

  const auto dir = std::filesystem::temp_directory_path() / "prefalign_bench_test";
  std::filesystem::create_directories(dir);
  write_gap_csv(rep, dir / "gaps.csv");
  write_gap_summary_csv(rep, dir / "summary.csv");
  write_gap_svg(rep, dir / "gaps.svg", 50, 0.1);
  std::ifstream in(dir / "gaps.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "seed,n,beta,lambda,gap_dpo,gap_ours,cov_opt,cov_max,bound_relaxed,bound_dpo");
  int lines = 0;
  for (std::string l; std::getline(in, l);) ++lines;
  CHECK(lines == 4);
  std::ifstream svg(dir / "gaps.svg");
  std::string body((std::istreambuf_iterator<char>(svg)), {});
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("</svg>") != std::string::npos);
  std::filesystem::remove_all(dir);
}
