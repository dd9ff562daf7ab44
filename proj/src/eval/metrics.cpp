#include "prefalign/eval/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"
#include "prefalign/common/stats.hpp"

namespace prefalign::eval {

BertScore bertscore_from_similarity(const Matrix& sim, double baseline) {
  if (sim.empty() || sim[0].empty()) throw ValidationError("bertscore: candidate and reference must be non-empty");
  if (!(baseline >= 0.0 && baseline < 1.0)) throw ValidationError("bertscore: baseline must be in [0, 1)");
  const std::size_t n_ref = sim.size(), n_cand = sim[0].size();
  double r = 0.0;
  std::vector<double> col_max(n_cand, -std::numeric_limits<double>::infinity());
  for (const auto& row : sim) {
    if (row.size() != n_cand) throw ValidationError("bertscore: ragged similarity table");
    r += *std::max_element(row.begin(), row.end());
    for (std::size_t j = 0; j < n_cand; ++j) col_max[j] = std::max(col_max[j], row[j]);
  }
  double p = 0.0;
  for (double v : col_max) p += v;
  BertScore s;
  s.recall = (r / n_ref - baseline) / (1.0 - baseline);
  s.precision = (p / n_cand - baseline) / (1.0 - baseline);
  const double den = s.precision + s.recall;
  s.f1 = den == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / den;
  return s;
}

BertScore bertscore(const Matrix& candidate, const Matrix& reference, double baseline) {
  if (candidate.empty() || reference.empty()) throw ValidationError("bertscore: candidate and reference must be non-empty");
  Matrix sim(reference.size(), std::vector<double>(candidate.size()));
  for (std::size_t i = 0; i < reference.size(); ++i) {
    for (std::size_t j = 0; j < candidate.size(); ++j) {
      if (reference[i].size() != candidate[j].size()) throw ValidationError("bertscore: embedding dimensions differ");
      double d = 0.0;
      for (std::size_t k = 0; k < reference[i].size(); ++k) d += reference[i][k] * candidate[j][k];
      sim[i][j] = d;
    }
  }
  return bertscore_from_similarity(sim, baseline);
}

BertScore bertscore(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                    const EmbeddingProvider& provider, double baseline) {
  if (candidate.empty() || reference.empty()) throw ValidationError("bertscore: candidate and reference must be non-empty");
  return bertscore(provider.embed(candidate), provider.embed(reference), baseline);
}

BertScore bertscore_text(const std::string& candidate, const std::string& reference, const EmbeddingProvider& provider,
                         double baseline) {
  return bertscore(tokenize_words(candidate), tokenize_words(reference), provider, baseline);
}

bool theory_matched(const MatchItem& item) {
  const std::string& t = item.review_type;
  if (t == "T1" || t == "T2" || t == "T3") {
    if (!item.n_rational || !item.n_emotional) throw ValidationError("theory match: item " + item.id + " lacks cue counts");
    const int r = *item.n_rational, e = *item.n_emotional;
    if (t == "T1") return r > e;
    if (t == "T2") return e > r;
    return r >= 1 && e >= 1;
  }
  if (t == "P1" || t == "P2" || t == "P3" || t == "P4") {
    if (!item.style) throw ValidationError("theory match: item " + item.id + " lacks a style label");
    const std::string advised = (t == "P1" || t == "P4") ? "template" : "tailored";
    return *item.style == advised;
  }
  throw ValidationError("theory match: no advised response for type \"" + t + "\"");
}

MatchReport theory_match_rate(const std::vector<MatchItem>& items) {
  MatchReport rep;
  for (const auto& it : items) {
    const bool negative = it.review_type.size() == 2 && it.review_type[0] == 'T';
    const bool labeled = negative ? (it.n_rational && it.n_emotional) : it.style.has_value();
    if (!labeled) {
      ++rep.unlabeled;
      log_warn("theory match: item " + it.id + " is unlabeled and excluded");
      continue;
    }
    const bool m = theory_matched(it);
    auto& slot = rep.per_type[it.review_type];
    ++slot.labeled;
    slot.matched += m;
    ++rep.overall.labeled;
    rep.overall.matched += m;
  }
  for (auto& [t, r] : rep.per_type) r.rate = static_cast<double>(r.matched) / r.labeled;
  if (rep.overall.labeled > 0) rep.overall.rate = static_cast<double>(rep.overall.matched) / rep.overall.labeled;
  if (!items.empty()) rep.coverage = static_cast<double>(rep.overall.labeled) / static_cast<double>(items.size());
  return rep;
}

std::vector<EvalSummary> summarize(const std::vector<EvalRow>& rows, const std::string& baseline_system, int resamples,
                                   std::uint64_t seed) {
  std::set<std::string> systems, types;
  for (const auto& r : rows) {
    systems.insert(r.system);
    types.insert(r.type);
  }
  std::vector<std::string> type_list(types.begin(), types.end());
  type_list.push_back("overall");
  std::vector<std::string> system_list;
  if (systems.count(baseline_system)) system_list.push_back(baseline_system);
  for (const auto& s : systems) {
    if (s != baseline_system) system_list.push_back(s);
  }

  std::vector<EvalSummary> out;
  for (const auto& type : type_list) {
    auto in_type = [&](const EvalRow& r) { return type == "overall" || r.type == type; };
    std::map<std::string, double> base_f;
    for (const auto& r : rows) {
      if (r.system == baseline_system && in_type(r)) base_f[r.id] = r.score.f1;
    }
    for (const auto& sys : system_list) {
      EvalSummary s;
      s.type = type;
      s.system = sys;
      std::vector<double> a, b;
      for (const auto& r : rows) {
        if (r.system != sys || !in_type(r)) continue;
        ++s.n;
        s.mean_r += r.score.recall;
        s.mean_p += r.score.precision;
        s.mean_f += r.score.f1;
        if (auto it = base_f.find(r.id); it != base_f.end()) {
          a.push_back(r.score.f1);
          b.push_back(it->second);
        }
      }
      if (s.n == 0) continue;
      s.mean_r /= s.n;
      s.mean_p /= s.n;
      s.mean_f /= s.n;
      if (sys != baseline_system && !a.empty()) s.p_value = paired_bootstrap_pvalue(a, b, resamples, seed);
      out.push_back(s);
    }
  }
  return out;
}

void write_eval_report(const std::filesystem::path& path, const std::vector<EvalRow>& rows,
                       const std::vector<EvalSummary>& summary) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(10);
  out << "system,id,type,R,P,F\n";
  for (const auto& r : rows) {
    out << r.system << ',' << r.id << ',' << r.type << ',' << r.score.recall << ',' << r.score.precision << ','
        << r.score.f1 << '\n';
  }
  out << "\nsummary,type,system,n,mean_R,mean_P,mean_F,p_value\n";
  for (const auto& s : summary) {
    out << "summary," << s.type << ',' << s.system << ',' << s.n << ',' << s.mean_r << ',' << s.mean_p << ','
        << s.mean_f << ',';
    if (s.p_value) out << *s.p_value;
    out << '\n';
  }
}

}  // namespace prefalign::eval
