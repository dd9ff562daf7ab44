#include "prefalign/corpus/annotator.hpp"

#include <algorithm>
#include <atomic>

#include "prefalign/common/error.hpp"
#include "prefalign/common/random.hpp"
#include "prefalign/corpus/lexicon.hpp"
#include "prefalign/corpus/record.hpp"

namespace prefalign::corpus {

namespace {

std::atomic<bool> g_network_allowed{true};

std::string field(const AnnotatorRequest& r, const char* key) {
  if (!r.fields.contains(key) || !r.fields[key].is_string()) return {};
  return r.fields[key].get<std::string>();
}

std::vector<std::string> sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    cur += c;
    if (c == '.' || c == '!' || c == '?') {
      if (auto s = trim(cur); !s.empty()) out.push_back(s);
      cur.clear();
    }
  }
  if (auto s = trim(cur); !s.empty()) out.push_back(s);
  return out;
}

nlohmann::json yes_no(const std::vector<bool>& answers) {
  nlohmann::json a = nlohmann::json::object();
  for (std::size_t i = 0; i < answers.size(); ++i) a[std::to_string(i + 1)] = answers[i] ? "Yes" : "No";
  return {{"answers", a}, {"explanations", nlohmann::json::object()}};
}

std::string mock_quality(const AnnotatorRequest& r) {
  const std::string resp = to_lower(field(r, "response"));
  int score = 4;
  if (trim(resp).empty()) score = 0;
  else if (lexicon::contains_any(resp, lexicon::rude_markers())) score = 1;
  return nlohmann::json{{"score", score}}.dump();
}

// Sentences of the response that carry a number and do not already appear
// in the review.
std::string mock_context(const AnnotatorRequest& r) {
  const std::string review = to_lower(field(r, "review"));
  nlohmann::json facts = nlohmann::json::array();
  for (const auto& s : sentences(field(r, "response"))) {
    const bool has_digit = s.find_first_of("0123456789") != std::string::npos;
    if (has_digit && review.find(to_lower(s)) == std::string::npos) {
      facts.push_back({{"fact", s}, {"source", "Managerial Response"}});
    }
  }
  return nlohmann::json{{"facts", facts}, {"explanations", nlohmann::json::array()}}.dump();
}

std::string mock_unfairness(const AnnotatorRequest& r) {
  const std::string review = to_lower(field(r, "review"));
  std::vector<bool> a(9);
  for (int i = 0; i < 9; ++i) a[i] = lexicon::contains_any(review, lexicon::complaint_phrases(i));
  return yes_no(a).dump();
}

std::string mock_positive_type(const AnnotatorRequest& r) {
  const std::string review = to_lower(field(r, "review"));
  const bool po = lexicon::contains_any(review, lexicon::positive_objective());
  const bool ps = lexicon::contains_any(review, lexicon::positive_subjective());
  const bool no = lexicon::contains_any(review, lexicon::negative_objective());
  const bool ns = lexicon::contains_any(review, lexicon::negative_subjective());
  const bool pos = po || ps, neg = no || ns, obj = po || no, subj = ps || ns;
  return yes_no({pos && !neg, neg && !pos, pos && neg, obj && !subj, subj && !obj, obj && subj}).dump();
}

std::string mock_cues(const AnnotatorRequest& r) {
  const auto found = lexicon::detect_cues(field(r, "response"));
  return yes_no(std::vector<bool>(found.begin(), found.end())).dump();
}

std::uint64_t attempt_seed(const AnnotatorRequest& r) {
  const int attempt = r.fields.value("attempt", 0);
  const std::uint64_t nonce = r.fields.value("nonce", std::uint64_t{0});
  return derive_seed(derive_seed(fnv1a(field(r, "review")), nonce), static_cast<std::uint64_t>(attempt));
}

std::string first_fact(const AnnotatorRequest& r) {
  if (r.fields.contains("facts") && r.fields["facts"].is_array() && !r.fields["facts"].empty()) {
    return r.fields["facts"][0].get<std::string>();
  }
  return {};
}

std::string mock_negative_response(const AnnotatorRequest& r) {
  Rng rng(attempt_seed(r));
  std::vector<int> cues;
  if (r.fields.contains("include")) {
    for (const auto& c : r.fields["include"]) {
      const int k = lexicon::cue_index(c.get<std::string>());
      if (k >= 0) cues.push_back(k);
    }
  }
  std::sort(cues.begin(), cues.end());
  std::string text;
  nlohmann::json expl = nlohmann::json::object();
  for (int c : cues) {
    const auto options = lexicon::cue_sentences(c);
    const auto& s = options[rng() % options.size()];
    if (!text.empty()) text += ' ';
    text += s;
    expl[std::string(lexicon::kCues[c])] = "Yes";
  }
  if (auto f = first_fact(r); !f.empty()) text += (text.empty() ? "" : " ") + f;
  return nlohmann::json{{"Response", text}, {"Explanation", expl}}.dump();
}

std::string mock_positive_response(const AnnotatorRequest& r) {
  Rng rng(attempt_seed(r));
  const std::string style = field(r, "style");
  const std::string review = to_lower(field(r, "review"));
  std::string text;
  if (style == "tailored") {
    const auto po = lexicon::positive_objective();
    const auto ps = lexicon::positive_subjective();
    const auto tail = lexicon::tailored_sentences();
    for (std::size_t i = 0; i < po.size(); ++i) {
      if (review.find(po[i]) != std::string::npos) text += (text.empty() ? "" : " ") + std::string(tail[i]);
    }
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (review.find(ps[i]) != std::string::npos) text += (text.empty() ? "" : " ") + std::string(tail[po.size() + i]);
    }
    if (text.empty()) text = std::string(tail[rng() % tail.size()]);
    text += " Thank you for your kind words.";
  } else {
    const auto t = lexicon::template_sentences();
    const std::size_t start = rng() % t.size();
    for (std::size_t i = 0; i < t.size(); ++i) text += (i ? " " : "") + std::string(t[(start + i) % t.size()]);
  }
  return nlohmann::json{{"Response", text}, {"Explanation", "style: " + style}}.dump();
}

std::string mock_style(const AnnotatorRequest& r) {
  return nlohmann::json{{"style", lexicon::detect_style(field(r, "response"))}}.dump();
}

}  // namespace

void set_network_allowed(bool allowed) { g_network_allowed = allowed; }
bool network_allowed() { return g_network_allowed; }

void MockAnnotator::set_canned(const std::string& task, const std::string& id, std::string text) {
  canned_[{task, id}] = std::move(text);
}

std::string MockAnnotator::complete(const AnnotatorRequest& r) {
  ++calls_;
  if (auto it = canned_.find({r.task, field(r, "id")}); it != canned_.end()) return it->second;
  if (r.task == "quality") return mock_quality(r);
  if (r.task == "context") return mock_context(r);
  if (r.task == "unfairness") return mock_unfairness(r);
  if (r.task == "positive_type") return mock_positive_type(r);
  if (r.task == "cues") return mock_cues(r);
  if (r.task == "response_style") return mock_style(r);
  if (r.task == "negative_response") return mock_negative_response(r);
  if (r.task == "positive_response") return mock_positive_response(r);
  throw AnnotatorError("mock annotator: unknown task \"" + r.task + "\"");
}

nlohmann::json extract_json(const std::string& text) {
  const auto a = text.find('{');
  const auto b = text.rfind('}');
  if (a == std::string::npos || b == std::string::npos || b < a) throw AnnotatorError("annotator reply has no JSON object");
  try {
    return nlohmann::json::parse(text.substr(a, b - a + 1));
  } catch (const nlohmann::json::parse_error& e) {
    throw AnnotatorError(std::string("annotator reply is not valid JSON: ") + e.what());
  }
}

std::vector<bool> parse_yes_no(const nlohmann::json& j, int n) {
  const nlohmann::json& a = j.contains("answers") ? j["answers"] : j;
  std::vector<bool> out(n);
  for (int i = 0; i < n; ++i) {
    const std::string key = std::to_string(i + 1);
    if (!a.contains(key) || !a[key].is_string()) throw AnnotatorError("annotator reply lacks answer " + key);
    const std::string v = to_lower(trim(a[key].get<std::string>()));
    if (v.rfind("yes", 0) == 0) out[i] = true;
    else if (v.rfind("no", 0) == 0) out[i] = false;
    else throw AnnotatorError("answer " + key + " is neither Yes nor No");
  }
  return out;
}

GeneratedResponse parse_generated(const std::string& text) {
  const auto j = extract_json(text);
  if (!j.contains("Response") || !j["Response"].is_string()) throw AnnotatorError("annotator reply lacks \"Response\"");
  GeneratedResponse g;
  g.response = trim(j["Response"].get<std::string>());
  g.explanation = j.value("Explanation", nlohmann::json());
  return g;
}

}  // namespace prefalign::corpus
