#include "prefalign/common/stats.hpp"

#include <cmath>
#include <vector>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"

namespace prefalign {

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double paired_bootstrap_pvalue(std::span<const double> a, std::span<const double> b, int resamples,
                               std::uint64_t seed) {
  if (a.size() != b.size()) throw ValidationError("paired_bootstrap_pvalue: samples differ in length");
  if (a.empty()) throw ValidationError("paired_bootstrap_pvalue: empty samples");
  if (resamples < 1) throw ValidationError("paired_bootstrap_pvalue: resamples must be >= 1");
  const std::size_t n = a.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
  const double observed = mean(d);
  for (double& x : d) x -= observed;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  int extreme = 0;
  for (int r = 0; r < resamples; ++r) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += d[pick(rng)];
    if (std::abs(s / static_cast<double>(n)) >= std::abs(observed)) ++extreme;
  }
  return (extreme + 1.0) / (resamples + 1.0);
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("ols_slope: need two or more paired points");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace prefalign
