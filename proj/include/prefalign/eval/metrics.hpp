#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prefalign/eval/embedding.hpp"

namespace prefalign::eval {

struct BertScore {
  double recall = 0.0;
  double precision = 0.0;
  double f1 = 0.0;
};

/// Greedy max-cosine matching. sim[i][j] is the similarity of reference
/// token i and candidate token j. Recall and precision are each rescaled by
/// (s - b) / (1 - b) before F is taken as their harmonic mean.
BertScore bertscore_from_similarity(const Matrix& sim, double baseline = 0.0);
/// Rows of both matrices must be unit vectors.
BertScore bertscore(const Matrix& candidate, const Matrix& reference, double baseline = 0.0);
BertScore bertscore(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                    const EmbeddingProvider& provider, double baseline = 0.0);
/// Word-tokenizes both texts first.
BertScore bertscore_text(const std::string& candidate, const std::string& reference,
                         const EmbeddingProvider& provider, double baseline = 0.0);

/// One response to score against its review type's advised profile. Negative
/// types need cue counts, positive types need a style; missing labels make
/// the item unlabeled.
struct MatchItem {
  std::string id;
  std::string review_type;  // T1..T3 | P1..P4
  std::optional<int> n_rational;
  std::optional<int> n_emotional;
  std::optional<std::string> style;  // template | tailored
};

/// T1: rational > emotional. T2: emotional > rational. T3: both present.
/// P1, P4: template. P2, P3: tailored. Throws ValidationError for other types.
bool theory_matched(const MatchItem& item);

struct MatchRate {
  std::optional<double> rate;  // none when nothing was labeled
  int matched = 0;
  int labeled = 0;
};

struct MatchReport {
  std::map<std::string, MatchRate> per_type;
  MatchRate overall;
  int unlabeled = 0;
  /// Labeled share of all items; none for an empty list.
  std::optional<double> coverage;
};

MatchReport theory_match_rate(const std::vector<MatchItem>& items);

struct EvalRow {
  std::string system;
  std::string id;
  std::string type;
  BertScore score;
};

struct EvalSummary {
  std::string type;  // review type or "overall"
  std::string system;
  int n = 0;
  double mean_r = 0.0;
  double mean_p = 0.0;
  double mean_f = 0.0;
  /// Paired bootstrap p-value of F against the baseline system; none for
  /// the baseline itself.
  std::optional<double> p_value;
};

/// Per-type and overall means for every system, each compared with
/// `baseline_system` over the items both systems scored.
std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows, const std::string& baseline_system,
                                   int resamples = 10000, std::uint64_t seed = 0);

/// Per-item block (system,id,type,R,P,F), a blank line, then the summary
/// block (summary,type,system,n,mean_R,mean_P,mean_F,p_value).
void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRow>& rows,
                       const std::vector<EvalSummary>& summary);

}  // namespace prefalign::eval
