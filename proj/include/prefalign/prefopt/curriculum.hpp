#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/prefopt/dpo.hpp"

namespace prefalign::prefopt {

/// Easy-to-hard schedule: pairs sorted by descending prefDist (ties by id)
/// and chunked into fixed batches. Batch order never changes; the order
/// inside each batch is redrawn every epoch.
class CurriculumPlan {
 public:
  CurriculumPlan() = default;
  CurriculumPlan(std::vector<std::vector<std::size_t>> batches, std::vector<std::string> ids,
                 std::vector<double> dists, std::size_t batch_size, std::uint64_t seed);

  std::size_t batch_size() const noexcept { return batch_size_; }
  std::size_t batch_count() const noexcept { return batches_.size(); }
  /// Indices into the original pair list, in curriculum order.
  const std::vector<std::vector<std::size_t>>& batches() const noexcept { return batches_; }
  std::vector<std::vector<std::string>> batch_ids() const;
  double dist(std::size_t index) const { return dists_.at(index); }

  /// Batches for `epoch` with their within-batch permutation applied. A
  /// batch of two or more pairs never repeats its previous epoch's order.
  std::vector<std::vector<std::size_t>> epoch_batches(int epoch) const;

 private:
  std::vector<std::vector<std::size_t>> batches_;
  std::vector<std::string> ids_;
  std::vector<double> dists_;
  std::size_t batch_size_ = 1;
  std::uint64_t seed_ = 0;
};

CurriculumPlan curriculum_order(const std::vector<std::string>& ids, const std::vector<double>& dists,
                                std::size_t batch_size, std::uint64_t seed);
CurriculumPlan curriculum_order(const std::vector<PrefExample>& pairs, const PolicyModel& ref,
                                std::size_t batch_size, std::uint64_t seed, bool raw_dist = false);
/// Same batching with the pairs in a seeded random order (no curriculum).
CurriculumPlan random_order(const std::vector<PrefExample>& pairs, std::size_t batch_size, std::uint64_t seed);

}  // namespace prefalign::prefopt
