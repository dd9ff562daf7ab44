#include "prefalign/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/nn/params.hpp"

namespace prefalign::nn {

GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           const std::function<std::vector<double>(std::span<const double>)>& grad,
                           std::vector<double> x, const GradCheckOptions& opts) {
  if (!(opts.epsilon >= 1e-6 && opts.epsilon <= 1e-3)) throw ValidationError("grad_check: epsilon must lie in [1e-6, 1e-3]");
  const std::vector<double> analytic = grad(x);
  if (analytic.size() != x.size()) throw Error("grad_check: gradient size mismatch");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), 0);
  if (opts.max_coords > 0 && opts.max_coords < coords.size()) {
    Rng rng(opts.seed);
    stable_shuffle(coords, rng);
    coords.resize(opts.max_coords);
    std::sort(coords.begin(), coords.end());
  }

  double amax = 0.0;
  for (double a : analytic) amax = std::max(amax, std::abs(a));
  const double floor = std::max(opts.floor_fraction * amax, 1e-300);

  GradCheckResult res;
  for (std::size_t i : coords) {
    const double orig = x[i];
    const double h = opts.epsilon * std::max(1.0, std::abs(orig));
    auto eval_at = [&](double delta) {
      x[i] = orig + delta;
      const double v = f(x);
      x[i] = orig;
      return v;
    };
    const double fp1 = eval_at(h), fm1 = eval_at(-h), fp2 = eval_at(2 * h), fm2 = eval_at(-2 * h);
    const double numeric = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    const double rel = std::abs(analytic[i] - numeric) / denom;
    if (rel > res.max_rel_error || res.checked == 0) {
      res.max_rel_error = std::max(res.max_rel_error, rel);
      if (rel >= res.max_rel_error) {
        res.worst_index = i;
        res.analytic_at_worst = analytic[i];
        res.numeric_at_worst = numeric;
      }
    }
    ++res.checked;
  }
  return res;
}

GradCheckResult grad_check(const std::function<Tensor()>& loss, ParameterSet& params, const GradCheckOptions& opts) {
  const std::vector<double> saved = params.flatten();
  auto f = [&](std::span<const double> x) {
    params.assign(x);
    NoGradGuard ng;
    return loss().item();
  };
  auto g = [&](std::span<const double> x) {
    params.assign(x);
    params.zero_grad();
    loss().backward();
    return params.flat_grad();
  };
  GradCheckResult res = grad_check(f, g, saved, opts);
  params.assign(saved);
  params.zero_grad();
  return res;
}

}  // namespace prefalign::nn
