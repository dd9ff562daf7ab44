#include "prefalign/corpus/curate.hpp"

#include <algorithm>
#include <set>

#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"
#include "prefalign/common/random.hpp"

namespace prefalign::corpus {

void CurationConfig::validate() const {
  if (word_cap <= 0) throw ValidationError("word_cap must be positive");
  if (quality_threshold < 0 || quality_threshold > 5) throw ValidationError("quality_threshold must be in 0..5");
  for (int n : {n_neg_train, n_pos_train, n_neg_val, n_pos_val, n_neg_test, n_pos_test}) {
    if (n < 0) throw ValidationError("split counts must be non-negative");
  }
}

namespace {

bool has_response(const ReviewRecord& r) { return r.response_text && !trim(*r.response_text).empty(); }

void take(std::vector<const ReviewRecord*>& pool, int n, std::vector<ReviewRecord>& out, std::set<std::string>& used,
          const std::string& what, bool strict) {
  int got = 0;
  for (const ReviewRecord* r : pool) {
    if (got == n) break;
    if (used.count(r->id)) continue;
    out.push_back(*r);
    used.insert(r->id);
    ++got;
  }
  if (got < n) {
    const std::string msg = "curate: " + what + " needs " + std::to_string(n) + " records but only " +
                            std::to_string(got) + " are available (short by " + std::to_string(n - got) + ")";
    if (strict) throw ValidationError(msg);
    log_warn(msg);
  }
}

}  // namespace

int score_quality(Annotator& annotator, const ReviewRecord& record) {
  AnnotatorRequest req;
  req.task = "quality";
  req.prompt = quality_prompt(record);
  req.max_tokens = 64;
  req.fields = {{"id", record.id}, {"review", record.review_text}, {"response", record.response_text.value_or("")}};
  const auto j = extract_json(annotator.complete(req));
  if (!j.contains("score") || !j["score"].is_number()) throw AnnotatorError("quality reply lacks a numeric \"score\"");
  const int s = j["score"].get<int>();
  if (s < 0 || s > 5) throw AnnotatorError("quality score out of 0..5");
  return s;
}

DatasetSplit curate(const std::vector<ReviewRecord>& records, Annotator& scorer, const CurationConfig& cfg) {
  cfg.validate();
  DatasetSplit split;
  split.counts_config = cfg;

  std::vector<const ReviewRecord*> neg, pos;
  for (const auto& r : records) {
    if (!has_response(r)) continue;
    if (r.polarity() == Polarity::Negative) neg.push_back(&r);
    else if (r.polarity() == Polarity::Positive) pos.push_back(&r);
  }

  std::set<std::string> used;
  auto passes = [&](const ReviewRecord& r) { return score_quality(scorer, r) >= cfg.quality_threshold; };

  // Training negatives: longest responses first, within the word cap.
  std::vector<const ReviewRecord*> neg_sorted;
  for (const auto* r : neg) {
    if (word_count(*r->response_text) <= static_cast<std::size_t>(cfg.word_cap)) neg_sorted.push_back(r);
  }
  std::stable_sort(neg_sorted.begin(), neg_sorted.end(), [](const ReviewRecord* a, const ReviewRecord* b) {
    const auto la = word_count(*a->response_text), lb = word_count(*b->response_text);
    return la != lb ? la > lb : a->id < b->id;
  });
  std::vector<const ReviewRecord*> neg_ok;
  for (const auto* r : neg_sorted) {
    if (static_cast<int>(neg_ok.size()) == cfg.n_neg_train) break;
    if (passes(*r)) neg_ok.push_back(r);
  }
  take(neg_ok, cfg.n_neg_train, split.train, used, "negative train", cfg.strict);

  Rng rng(derive_seed(cfg.seed, "curate/positive-train"));
  std::vector<const ReviewRecord*> pos_shuffled = pos;
  stable_shuffle(pos_shuffled, rng);
  std::vector<const ReviewRecord*> pos_ok;
  for (const auto* r : pos_shuffled) {
    if (static_cast<int>(pos_ok.size()) == cfg.n_pos_train) break;
    if (passes(*r)) pos_ok.push_back(r);
  }
  take(pos_ok, cfg.n_pos_train, split.train, used, "positive train", cfg.strict);

  auto sample_rest = [&](const std::vector<const ReviewRecord*>& pool, const char* label, int n,
                         std::vector<ReviewRecord>& out, const std::string& what) {
    std::vector<const ReviewRecord*> rest;
    for (const auto* r : pool) {
      if (!used.count(r->id)) rest.push_back(r);
    }
    Rng r(derive_seed(cfg.seed, label));
    stable_shuffle(rest, r);
    take(rest, n, out, used, what, cfg.strict);
  };
  sample_rest(neg, "curate/negative-validation", cfg.n_neg_val, split.validation, "negative validation");
  sample_rest(pos, "curate/positive-validation", cfg.n_pos_val, split.validation, "positive validation");
  sample_rest(neg, "curate/negative-test", cfg.n_neg_test, split.test, "negative test");
  sample_rest(pos, "curate/positive-test", cfg.n_pos_test, split.test, "positive test");
  return split;
}

std::vector<std::string> extract_context(const ReviewRecord& record, Annotator& annotator) {
  if (!has_response(record)) throw ValidationError("extract_context: record " + record.id + " has no response");
  AnnotatorRequest req;
  req.task = "context";
  req.prompt = context_prompt(record);
  req.fields = {{"id", record.id}, {"review", record.review_text}, {"response", *record.response_text}};
  const auto j = extract_json(annotator.complete(req));
  if (!j.contains("facts") || !j["facts"].is_array()) throw AnnotatorError("context reply lacks a \"facts\" array");
  std::vector<std::string> facts;
  for (const auto& f : j["facts"]) {
    std::string s;
    if (f.is_string()) s = f.get<std::string>();
    else if (f.is_object() && f.contains("fact") && f["fact"].is_string()) s = f["fact"].get<std::string>();
    else throw AnnotatorError("context reply has a malformed fact entry");
    s = trim(s);
    if (!s.empty()) facts.push_back(std::move(s));
  }
  return facts;
}

std::string render_prompt(const ReviewRecord& record, bool include_context) {
  const Polarity p = record.polarity();
  if (p == Polarity::Neutral) throw ValidationError("render_prompt: record " + record.id + " is neutral");
  std::string out = "I want you to act as a hotel manager. Your task is to write a response to the following ";
  out += to_string(p);
  out += " customer review.";
  if (include_context && !record.context_facts.empty()) {
    out += " You know the following facts about the customer and the hotel:\n\n";
    for (std::size_t i = 0; i < record.context_facts.size(); ++i) {
      out += std::to_string(i + 1) + ". " + record.context_facts[i] + "\n";
    }
  } else {
    out += "\n";
  }
  out += "\n" + record.review_text;
  return out;
}

std::string quality_prompt(const ReviewRecord& record) {
  return "Please act as an impartial judge and evaluate the quality of the managerial response to the customer "
         "review below. Consider its helpfulness, relevance, accuracy, and level of detail. Rate the response on a "
         "scale from 0 to 5 and reply in JSON format with the key \"score\".\n\n###Customer Review###\n" +
         record.review_text + "\n\n###Managerial Response###\n" + record.response_text.value_or("") + "\n";
}

std::string context_prompt(const ReviewRecord& record) {
  return "Analyze the provided customer review and the managerial response. Your task is to identify and list "
         "objective facts that are mentioned in the managerial response but not in the customer review. Follow these "
         "guidelines:\n\n"
         "1. Focus on objective and specific facts related to the customer who posted the review or the hotel. This "
         "includes customer's name, manager's name, manager's contact information, the hotel's name, hotel's "
         "facilities, and any mentioned hotel policies.\n"
         "2. Exclude any actions the hotel manager proposes or takes to address the customer's complaints from your "
         "list.\n\n"
         "For each fact you identify, provide a summary of the identified facts and the source of the fact. You also "
         "need to provide a detailed explanation as to why these facts cannot be deduced by a Large Language Model "
         "solely from the customer review. The explanations should cover why the model would not infer these details "
         "without external information.\n\n"
         "Present your findings in a structured JSON format, with two key components: facts and explanations. The "
         "facts should list the each of summarized objective information, while the explanations should "
         "correspondingly clarify why each fact listed is not inferable by a Large Language Model from the customer "
         "review alone.\n\n"
         "###Customer Review###\n" +
         record.review_text + "\n\n###Customer Response###\n" + record.response_text.value_or("") + "\n";
}

}  // namespace prefalign::corpus
