#include "prefalign/pairgen/classify.hpp"

#include <algorithm>

#include "prefalign/corpus/lexicon.hpp"

namespace prefalign::pairgen {

namespace lex = corpus::lexicon;

UnfairnessScores score_unfairness(std::span<const bool> answers) {
  if (answers.size() != 9) throw ValidationError("score_unfairness: expected 9 answers");
  UnfairnessScores s;
  std::copy(answers.begin(), answers.end(), s.answers.begin());
  for (int i = 0; i < 3; ++i) {
    s.du += answers[i];
    s.pu += answers[3 + i];
    s.iu += answers[6 + i];
  }
  return s;
}

UnfairnessScores score_unfairness(const std::vector<bool>& answers) {
  if (answers.size() != 9) throw ValidationError("score_unfairness: expected 9 answers");
  std::array<bool, 9> a{};
  std::copy(answers.begin(), answers.end(), a.begin());
  return score_unfairness(a);
}

UnfairnessScores scores_from_sums(int du, int pu, int iu) {
  for (int v : {du, pu, iu}) {
    if (v < 0 || v > 3) throw ValidationError("unfairness sums must be in 0..3");
  }
  std::array<bool, 9> a{};
  for (int i = 0; i < du; ++i) a[i] = true;
  for (int i = 0; i < pu; ++i) a[3 + i] = true;
  for (int i = 0; i < iu; ++i) a[6 + i] = true;
  return score_unfairness(a);
}

std::string to_string(NegativeType t) { return "T" + std::to_string(static_cast<int>(t) + 1); }
std::string to_string(PositiveType t) { return "P" + std::to_string(static_cast<int>(t) + 1); }

std::optional<NegativeType> parse_negative_type(std::string_view s) {
  if (s.size() == 2 && s[0] == 'T' && s[1] >= '1' && s[1] <= '4') return static_cast<NegativeType>(s[1] - '1');
  return std::nullopt;
}

std::optional<PositiveType> parse_positive_type(std::string_view s) {
  if (s.size() == 2 && s[0] == 'P' && s[1] >= '1' && s[1] <= '5') return static_cast<PositiveType>(s[1] - '1');
  return std::nullopt;
}

std::optional<NegativeType> classify_negative(const UnfairnessScores& s) {
  if (s.pu > s.iu) return NegativeType::T1;
  if (s.iu > s.pu) return NegativeType::T2;
  if (s.pu > 0) return NegativeType::T3;
  if (s.du > 0) return NegativeType::T4;
  return std::nullopt;
}

std::optional<PositiveType> classify_positive(std::span<const bool> q) {
  if (q.size() != 6) throw ValidationError("classify_positive: expected 6 answers");
  if (q[3] + q[4] + q[5] > 1) throw InconsistentAnnotation("classify_positive: more than one of Q4-Q6 answered Yes");
  if (q[0] && q[3]) return PositiveType::P1;
  if (q[0] && q[4]) return PositiveType::P2;
  if (q[2] && q[3]) return PositiveType::P3;
  if (q[2] && q[4]) return PositiveType::P4;
  if (q[5]) return PositiveType::P5;
  return std::nullopt;
}

std::optional<PositiveType> classify_positive(const std::vector<bool>& answers) {
  if (answers.size() != 6) throw ValidationError("classify_positive: expected 6 answers");
  std::array<bool, 6> a{};
  std::copy(answers.begin(), answers.end(), a.begin());
  return classify_positive(std::span<const bool>(a));
}

std::vector<std::string> CueConstraint::excluded() const {
  std::vector<std::string> out;
  for (int c = 0; c < 8; ++c) {
    const std::string name(lex::kCues[c]);
    const auto& family = c < lex::kRationalCount ? rational : emotional;
    if (std::find(family.begin(), family.end(), name) == family.end()) out.push_back(name);
  }
  return out;
}

nlohmann::json CueConstraint::to_json() const {
  return {{"n_r", n_r}, {"n_e", n_e}, {"rational", rational}, {"emotional", emotional}};
}

CueConstraint CueConstraint::from_json(const nlohmann::json& j) {
  CueConstraint c;
  c.n_r = j.at("n_r").get<int>();
  c.n_e = j.at("n_e").get<int>();
  c.rational = j.at("rational").get<std::vector<std::string>>();
  c.emotional = j.at("emotional").get<std::vector<std::string>>();
  return c;
}

bool satisfies(NegativeType t, int n_r, int n_e) {
  if (n_r < 0 || n_r > 4 || n_e < 0 || n_e > 4) return false;
  switch (t) {
    case NegativeType::T1: return n_e > n_r;
    case NegativeType::T2: return n_r > n_e;
    case NegativeType::T3: return (n_r == 0) != (n_e == 0);
    case NegativeType::T4: return false;
  }
  return false;
}

bool satisfies(NegativeType t, const CueConstraint& c) {
  auto in_family = [](const std::vector<std::string>& names, int lo, int hi) {
    for (const auto& n : names) {
      const int k = lex::cue_index(n);
      if (k < lo || k >= hi) return false;
    }
    std::vector<std::string> sorted = names;
    std::sort(sorted.begin(), sorted.end());
    return std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end();
  };
  return static_cast<int>(c.rational.size()) == c.n_r && static_cast<int>(c.emotional.size()) == c.n_e &&
         in_family(c.rational, 0, lex::kRationalCount) && in_family(c.emotional, lex::kRationalCount, 8) &&
         satisfies(t, c.n_r, c.n_e);
}

std::vector<std::pair<int, int>> valid_counts(NegativeType t) {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r <= 4; ++r) {
    for (int e = 0; e <= 4; ++e) {
      if (satisfies(t, r, e)) out.emplace_back(r, e);
    }
  }
  return out;
}

namespace {

CueConstraint fill_names(int n_r, int n_e, Rng& rng) {
  CueConstraint c;
  c.n_r = n_r;
  c.n_e = n_e;
  auto draw = [&](int offset, int k) {
    std::vector<int> idx{0, 1, 2, 3};
    stable_shuffle(idx, rng);
    std::vector<std::string> names;
    for (int i = 0; i < k; ++i) names.emplace_back(lex::kCues[offset + idx[i]]);
    return names;
  };
  c.rational = draw(0, n_r);
  c.emotional = draw(lex::kRationalCount, n_e);
  return c;
}

}  // namespace

CueConstraint sample_cue_constraint(NegativeType t, Rng& rng) {
  if (t == NegativeType::T4) throw ValidationError("sample_cue_constraint: no less-preferred criterion for T4");
  const auto valid = valid_counts(t);
  const auto& [r, e] = valid[rng() % valid.size()];
  return fill_names(r, e, rng);
}

std::pair<CueConstraint, CueConstraint> sample_t3_constraints(Rng& rng) {
  const int r = 1 + static_cast<int>(rng() % 4);
  CueConstraint rational_only = fill_names(r, 0, rng);
  const int e = 1 + static_cast<int>(rng() % 4);
  CueConstraint emotional_only = fill_names(0, e, rng);
  return {std::move(rational_only), std::move(emotional_only)};
}

}  // namespace prefalign::pairgen
