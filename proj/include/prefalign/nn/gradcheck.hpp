#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "prefalign/nn/tensor.hpp"

namespace prefalign::nn {

class ParameterSet;

struct GradCheckOptions {
  /// Relative step; the actual step for coordinate i is epsilon * max(1, |p_i|).
  double epsilon = 1e-4;
  /// Check at most this many coordinates (chosen uniformly without replacement).
  std::size_t max_coords = 0;  // 0 = all
  std::uint64_t seed = 0;
  /// Components smaller than floor_fraction * max|analytic| are compared
  /// against that floor instead of their own magnitude.
  double floor_fraction = 1e-3;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

/// Compares an analytic gradient against fourth-order central differences.
GradCheckResult grad_check(const std::function<double(std::span<const double>)>& f,
                           const std::function<std::vector<double>(std::span<const double>)>& grad,
                           std::vector<double> x, const GradCheckOptions& opts = {});

/// Same check for a scalar objective built from `params` by `loss`.
GradCheckResult grad_check(const std::function<Tensor()>& loss, ParameterSet& params,
                           const GradCheckOptions& opts = {});

}  // namespace prefalign::nn
