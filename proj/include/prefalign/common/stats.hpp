#pragma once

#include <cstdint>
#include <span>

namespace prefalign {

double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double stddev(std::span<const double> v);

/// Two-sided paired bootstrap p-value for H0: E[a - b] = 0. Differences are
/// centered to impose the null, resampled with replacement, and the p-value
/// is the fraction of resampled means at least as extreme as the observed
/// mean (with the +1 correction).
double paired_bootstrap_pvalue(std::span<const double> a, std::span<const double> b, int resamples,
                               std::uint64_t seed);

/// Least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace prefalign
