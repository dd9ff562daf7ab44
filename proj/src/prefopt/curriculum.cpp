#include "prefalign/prefopt/curriculum.hpp"

#include <algorithm>
#include <numeric>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"

namespace prefalign::prefopt {

namespace {

std::vector<std::vector<std::size_t>> chunk(const std::vector<std::size_t>& order, std::size_t m) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < order.size(); s += m) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), s + m)));
  }
  return out;
}

}  // namespace

CurriculumPlan::CurriculumPlan(std::vector<std::vector<std::size_t>> batches, std::vector<std::string> ids,
                               std::vector<double> dists, std::size_t batch_size, std::uint64_t seed)
    : batches_(std::move(batches)), ids_(std::move(ids)), dists_(std::move(dists)), batch_size_(batch_size),
      seed_(seed) {}

std::vector<std::vector<std::string>> CurriculumPlan::batch_ids() const {
  std::vector<std::vector<std::string>> out;
  for (const auto& b : batches_) {
    auto& row = out.emplace_back();
    for (std::size_t i : b) row.push_back(ids_[i]);
  }
  return out;
}

std::vector<std::vector<std::size_t>> CurriculumPlan::epoch_batches(int epoch) const {
  if (epoch < 0) throw ValidationError("epoch_batches: negative epoch");
  std::vector<std::vector<std::size_t>> out;
  out.reserve(batches_.size());
  for (std::size_t b = 0; b < batches_.size(); ++b) {
    std::vector<std::size_t> prev;
    std::vector<std::size_t> cur;
    for (int e = 0; e <= epoch; ++e) {
      Rng rng(derive_seed(derive_seed(seed_, static_cast<std::uint64_t>(b)), static_cast<std::uint64_t>(e)));
      cur = batches_[b];
      stable_shuffle(cur, rng);
      while (e > 0 && cur.size() >= 2 && cur == prev) stable_shuffle(cur, rng);
      prev = cur;
    }
    out.push_back(std::move(cur));
  }
  return out;
}

CurriculumPlan curriculum_order(const std::vector<std::string>& ids, const std::vector<double>& dists,
                                std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ValidationError("curriculum_order: batch size must be >= 1");
  if (ids.size() != dists.size()) throw ValidationError("curriculum_order: ids and distances differ in length");
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dists[a] != dists[b]) return dists[a] > dists[b];
    return ids[a] < ids[b];
  });
  return CurriculumPlan(chunk(order, batch_size), ids, dists, batch_size, seed);
}

CurriculumPlan curriculum_order(const std::vector<PrefExample>& pairs, const PolicyModel& ref,
                                std::size_t batch_size, std::uint64_t seed, bool raw_dist) {
  std::vector<std::string> ids;
  std::vector<double> dists;
  for (const auto& p : pairs) {
    ids.push_back(p.id);
    dists.push_back(pref_dist(ref, p, raw_dist));
  }
  return curriculum_order(ids, dists, batch_size, seed);
}

CurriculumPlan random_order(const std::vector<PrefExample>& pairs, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ValidationError("random_order: batch size must be >= 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, "random-order"));
  stable_shuffle(order, rng);
  std::vector<std::string> ids;
  for (const auto& p : pairs) ids.push_back(p.id);
  return CurriculumPlan(chunk(order, batch_size), ids, std::vector<double>(pairs.size(), 0.0), batch_size, seed);
}

}  // namespace prefalign::prefopt
