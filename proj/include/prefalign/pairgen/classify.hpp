#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"

namespace prefalign::pairgen {

/// Complaint answers in question order (equality, equity, need, speed,
/// flexibility, accessibility, politeness, effort, empathy) and their
/// distributive / procedural / interactional sums.
struct UnfairnessScores {
  std::array<bool, 9> answers{};
  int du = 0;
  int pu = 0;
  int iu = 0;
};

UnfairnessScores score_unfairness(std::span<const bool> answers);
UnfairnessScores score_unfairness(const std::vector<bool>& answers);
/// Scores built straight from sums (answers filled left to right).
UnfairnessScores scores_from_sums(int du, int pu, int iu);

enum class NegativeType { T1, T2, T3, T4 };
enum class PositiveType { P1, P2, P3, P4, P5 };

std::string to_string(NegativeType t);
std::string to_string(PositiveType t);
std::optional<NegativeType> parse_negative_type(std::string_view s);
std::optional<PositiveType> parse_positive_type(std::string_view s);

/// pu > iu: T1; iu > pu: T2; pu = iu > 0: T3; only du > 0: T4; nothing: none.
std::optional<NegativeType> classify_negative(const UnfairnessScores& s);

/// More than one of Q4..Q6 answered Yes.
class InconsistentAnnotation : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Six answers Q1..Q6. The first matching row wins: (Q1,Q4) P1, (Q1,Q5) P2,
/// (Q3,Q4) P3, (Q3,Q5) P4, Q6 P5.
std::optional<PositiveType> classify_positive(std::span<const bool> answers);
std::optional<PositiveType> classify_positive(const std::vector<bool>& answers);

struct CueConstraint {
  int n_r = 0;
  int n_e = 0;
  std::vector<std::string> rational;
  std::vector<std::string> emotional;

  /// Cues the response must not show: the complement within each family.
  std::vector<std::string> excluded() const;
  nlohmann::json to_json() const;
  static CueConstraint from_json(const nlohmann::json& j);
  bool operator==(const CueConstraint&) const = default;
};

/// Less-preferred criterion: T1 needs n_e > n_r, T2 n_r > n_e, T3 exactly
/// one of them zero and the other positive. T4 has no criterion.
bool satisfies(NegativeType t, int n_r, int n_e);
bool satisfies(NegativeType t, const CueConstraint& c);

/// All (n_r, n_e) in 0..4 x 0..4 meeting the criterion, row-major order.
std::vector<std::pair<int, int>> valid_counts(NegativeType t);

/// Counts uniform over the valid set, cue names uniform without replacement.
/// Throws ValidationError for T4.
CueConstraint sample_cue_constraint(NegativeType t, Rng& rng);

/// One constraint with rational cues only and one with emotional cues only.
std::pair<CueConstraint, CueConstraint> sample_t3_constraints(Rng& rng);

}  // namespace prefalign::pairgen
