#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prefalign/corpus/record.hpp"

namespace prefalign::corpus {

struct ToyCorpus {
  std::vector<ReviewRecord> records;
  /// Intended review type per id ("T1".."T4", "P1".."P5", or "neutral").
  std::map<std::string, std::string> intended_type;
};

/// Synthetic hotel reviews built from the shared phrase banks. Human
/// responses follow the advised cue mix for their review type and state one
/// numeric fact; a small share of responses is rude and a few are missing.
ToyCorpus make_toy_corpus(int n_reviews, std::uint64_t seed);

}  // namespace prefalign::corpus
