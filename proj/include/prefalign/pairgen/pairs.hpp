#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefalign/corpus/annotator.hpp"
#include "prefalign/corpus/record.hpp"
#include "prefalign/pairgen/classify.hpp"

namespace prefalign::pairgen {

struct PreferencePair {
  std::string id;
  std::string prompt;
  std::vector<std::string> context;
  std::string preferred;
  std::string less_preferred;
  std::string polarity;  // negative | positive
  std::string type;      // T1..T3 | P1..P4
  nlohmann::json constraint = nlohmann::json::object();

  nlohmann::json to_json() const;
  static PreferencePair from_json(const nlohmann::json& j);
  bool operator==(const PreferencePair&) const = default;
};

void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> load_pairs(const std::filesystem::path& path);

/// Generation kept failing the constraint check.
class VerificationError : public Error {
 public:
  using Error::Error;
};

struct PairOptions {
  int max_attempts = 3;
  /// Training-form prompts carry the context facts; test-form prompts do not.
  bool include_context = true;
};

/// Review type assigned through the annotator.
struct Classification {
  std::string polarity;
  std::optional<std::string> type;  // none: no complaint found, or unclassifiable
  std::vector<bool> answers;
  std::optional<UnfairnessScores> scores;
  std::string flag;  // non-empty when the annotation was rejected

  nlohmann::json to_json() const;
  static Classification from_json(const nlohmann::json& j);
};

Classification classify_record(const corpus::ReviewRecord& record, corpus::Annotator& annotator);

/// Cue presence (Explanation .. Encouragement) in a manager response.
std::array<bool, 8> identify_cues(corpus::Annotator& annotator, const std::string& review, const std::string& response);
/// "template" or "tailored".
std::string identify_style(corpus::Annotator& annotator, const std::string& review, const std::string& response);

/// Less-preferred response generated under `constraint`, checked by cue
/// identification against the type's criterion, regenerated up to
/// max_attempts times. Throws VerificationError when every attempt fails.
PreferencePair build_negative_pair(const corpus::ReviewRecord& record, NegativeType t, const CueConstraint& constraint,
                                   corpus::Annotator& annotator, Rng& rng, const PairOptions& opts = {});

/// Tailored less-preferred response for P1 and P4, template for P2 and P3.
/// Throws ValidationError for P5.
PreferencePair build_positive_pair(const corpus::ReviewRecord& record, PositiveType t, corpus::Annotator& annotator,
                                   Rng& rng, const PairOptions& opts = {});

/// Whole procedure for one classified record with its own random stream
/// derive_seed(seed, id). Returns none for T4, P5 and unclassified records.
/// Type 3 samples one rational-only and one emotional-only constraint,
/// builds both candidates, and keeps one at random.
std::optional<PreferencePair> construct_pair(const corpus::ReviewRecord& record, const Classification& c,
                                             corpus::Annotator& annotator, std::uint64_t seed,
                                             const PairOptions& opts = {});

std::string complaint_prompt(const std::string& review);
std::string positive_type_prompt(const std::string& review);
std::string negative_generation_prompt(const corpus::ReviewRecord& record, const CueConstraint& c);
std::string positive_generation_prompt(const corpus::ReviewRecord& record, const std::string& style);
std::string cue_identification_prompt(const std::string& review, const std::string& response);
std::string style_identification_prompt(const std::string& review, const std::string& response);

}  // namespace prefalign::pairgen
