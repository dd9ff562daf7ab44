#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefalign/corpus/annotator.hpp"
#include "prefalign/corpus/record.hpp"

namespace prefalign::corpus {

struct CurationConfig {
  int word_cap = 400;
  int quality_threshold = 3;
  int n_neg_train = 1000;
  int n_pos_train = 200;
  int n_neg_val = 100;
  int n_pos_val = 20;
  int n_neg_test = 2000;
  int n_pos_test = 1000;
  std::uint64_t seed = 0;
  /// When false a shortfall shrinks the split with a warning instead of
  /// throwing.
  bool strict = true;

  void validate() const;
};

struct DatasetSplit {
  std::vector<ReviewRecord> train;
  std::vector<ReviewRecord> validation;
  std::vector<ReviewRecord> test;
  CurationConfig counts_config;
};

/// Training negatives: responses over word_cap words are dropped, the rest
/// sorted by response length (longest first), low-quality ones removed, and
/// the top n_neg_train kept. Training positives are a seeded sample of the
/// quality-passing positives. Validation and test are seeded samples of
/// the remaining records with responses. Neutral records never appear.
DatasetSplit curate(const std::vector<ReviewRecord>& records, Annotator& scorer, const CurationConfig& cfg);

/// Quality of a human response on a 0..5 scale.
int score_quality(Annotator& annotator, const ReviewRecord& record);

/// Objective facts stated in the response but absent from the review.
/// Throws ValidationError when the record has no response.
std::vector<std::string> extract_context(const ReviewRecord& record, Annotator& annotator);

/// Training-form prompt (include_context) or test-form prompt.
std::string render_prompt(const ReviewRecord& record, bool include_context);

std::string quality_prompt(const ReviewRecord& record);
std::string context_prompt(const ReviewRecord& record);

}  // namespace prefalign::corpus
