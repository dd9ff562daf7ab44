#pragma once

#include <span>
#include <string>
#include <vector>

#include "prefalign/common/random.hpp"
#include "prefalign/nn/tensor.hpp"

namespace prefalign::nn {

/// Ordered collection of named trainable leaves. The declaration order is the
/// flat layout used by optimizers, gradient checks and checkpoints.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  Tensor add(std::string name, int rows, int cols);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t count() const noexcept { return count_; }

  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  std::vector<double> flat_grad() const;
  void zero_grad();

  const Tensor& get(const std::string& name) const;

 private:
  std::vector<Entry> entries_;
  std::size_t count_ = 0;
};

void init_normal(Tensor& t, double stddev, Rng& rng);
void init_constant(Tensor& t, double v);

}  // namespace prefalign::nn
