#include "prefalign/pairgen/pairs.hpp"

#include <fstream>

#include "prefalign/common/log.hpp"
#include "prefalign/corpus/curate.hpp"
#include "prefalign/corpus/lexicon.hpp"

namespace prefalign::pairgen {

namespace lex = corpus::lexicon;
using corpus::AnnotatorRequest;
using corpus::ReviewRecord;

nlohmann::json PreferencePair::to_json() const {
  return {{"id", id},
          {"prompt", prompt},
          {"context", context},
          {"preferred", preferred},
          {"less_preferred", less_preferred},
          {"polarity", polarity},
          {"type", type},
          {"constraint", constraint}};
}

PreferencePair PreferencePair::from_json(const nlohmann::json& j) {
  PreferencePair p;
  p.id = j.at("id").get<std::string>();
  p.prompt = j.at("prompt").get<std::string>();
  p.context = j.value("context", std::vector<std::string>{});
  p.preferred = j.at("preferred").get<std::string>();
  p.less_preferred = j.at("less_preferred").get<std::string>();
  p.polarity = j.at("polarity").get<std::string>();
  p.type = j.at("type").get<std::string>();
  p.constraint = j.value("constraint", nlohmann::json::object());
  return p;
}

void save_pairs(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pairs) out << p.to_json().dump() << '\n';
}

std::vector<PreferencePair> load_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<PreferencePair> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (corpus::trim(line).empty()) continue;
    try {
      out.push_back(PreferencePair::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(e.what(), no);
    }
  }
  return out;
}

nlohmann::json Classification::to_json() const {
  nlohmann::json j{{"polarity", polarity}, {"type", type ? nlohmann::json(*type) : nlohmann::json(nullptr)},
                   {"answers", answers}, {"flag", flag}};
  if (scores) j["scores"] = {{"du", scores->du}, {"pu", scores->pu}, {"iu", scores->iu}};
  return j;
}

Classification Classification::from_json(const nlohmann::json& j) {
  Classification c;
  c.polarity = j.at("polarity").get<std::string>();
  if (j.contains("type") && j["type"].is_string()) c.type = j["type"].get<std::string>();
  c.answers = j.value("answers", std::vector<bool>{});
  c.flag = j.value("flag", std::string());
  if (c.polarity == "negative" && c.answers.size() == 9) c.scores = score_unfairness(c.answers);
  return c;
}

namespace {

std::vector<bool> ask(corpus::Annotator& a, const std::string& task, std::string prompt, nlohmann::json fields, int n) {
  AnnotatorRequest req;
  req.task = task;
  req.prompt = std::move(prompt);
  req.fields = std::move(fields);
  return corpus::parse_yes_no(corpus::extract_json(a.complete(req)), n);
}

}  // namespace

Classification classify_record(const ReviewRecord& record, corpus::Annotator& annotator) {
  Classification c;
  c.polarity = std::string(corpus::to_string(record.polarity()));
  const nlohmann::json fields{{"id", record.id}, {"review", record.review_text}};
  if (record.polarity() == corpus::Polarity::Negative) {
    c.answers = ask(annotator, "unfairness", complaint_prompt(record.review_text), fields, 9);
    c.scores = score_unfairness(c.answers);
    if (auto t = classify_negative(*c.scores)) c.type = to_string(*t);
  } else if (record.polarity() == corpus::Polarity::Positive) {
    c.answers = ask(annotator, "positive_type", positive_type_prompt(record.review_text), fields, 6);
    try {
      if (auto t = classify_positive(c.answers)) c.type = to_string(*t);
    } catch (const InconsistentAnnotation& e) {
      c.flag = e.what();
      log_warn("record " + record.id + ": " + e.what());
    }
  }
  return c;
}

std::array<bool, 8> identify_cues(corpus::Annotator& annotator, const std::string& review, const std::string& response) {
  const auto v = ask(annotator, "cues", cue_identification_prompt(review, response),
                     {{"review", review}, {"response", response}}, 8);
  std::array<bool, 8> out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

std::string identify_style(corpus::Annotator& annotator, const std::string& review, const std::string& response) {
  AnnotatorRequest req;
  req.task = "response_style";
  req.prompt = style_identification_prompt(review, response);
  req.fields = {{"review", review}, {"response", response}};
  const auto j = corpus::extract_json(annotator.complete(req));
  const std::string s = corpus::to_lower(j.value("style", std::string()));
  if (s != "template" && s != "tailored") throw AnnotatorError("style reply must be \"template\" or \"tailored\"");
  return s;
}

namespace {

PreferencePair base_pair(const ReviewRecord& record, const PairOptions& opts) {
  if (!record.response_text) throw ValidationError("record " + record.id + " has no human response");
  PreferencePair p;
  p.id = record.id;
  p.prompt = corpus::render_prompt(record, opts.include_context);
  if (opts.include_context) p.context = record.context_facts;
  p.preferred = *record.response_text;
  p.polarity = std::string(corpus::to_string(record.polarity()));
  return p;
}

std::string generate(corpus::Annotator& a, const std::string& task, std::string prompt, nlohmann::json fields) {
  AnnotatorRequest req;
  req.task = task;
  req.prompt = std::move(prompt);
  req.temperature = 0.7;
  req.fields = std::move(fields);
  return corpus::parse_generated(a.complete(req)).response;
}

}  // namespace

PreferencePair build_negative_pair(const ReviewRecord& record, NegativeType t, const CueConstraint& constraint,
                                   corpus::Annotator& annotator, Rng& rng, const PairOptions& opts) {
  if (t == NegativeType::T4) throw ValidationError("build_negative_pair: T4 reviews get no pair");
  if (!satisfies(t, constraint)) throw ValidationError("build_negative_pair: constraint does not fit type " + to_string(t));
  PreferencePair p = base_pair(record, opts);
  p.type = to_string(t);
  const std::uint64_t nonce = rng();
  std::vector<std::string> include = constraint.rational;
  include.insert(include.end(), constraint.emotional.begin(), constraint.emotional.end());
  std::string last_problem;
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const std::string text = generate(annotator, "negative_response", negative_generation_prompt(record, constraint),
                                      {{"id", record.id},
                                       {"review", record.review_text},
                                       {"facts", record.context_facts},
                                       {"include", include},
                                       {"exclude", constraint.excluded()},
                                       {"attempt", attempt},
                                       {"nonce", nonce}});
    if (text.empty() || text == p.preferred) {
      last_problem = "generated response is empty or identical to the preferred one";
      continue;
    }
    const auto found = identify_cues(annotator, record.review_text, text);
    int n_r = 0, n_e = 0;
    for (int c = 0; c < 8; ++c) (c < lex::kRationalCount ? n_r : n_e) += found[c];
    if (!satisfies(t, n_r, n_e)) {
      last_problem = "identified cues (" + std::to_string(n_r) + " rational, " + std::to_string(n_e) +
                     " emotional) violate the " + to_string(t) + " criterion";
      continue;
    }
    p.less_preferred = text;
    p.constraint = constraint.to_json();
    p.constraint["detected"] = {{"n_r", n_r}, {"n_e", n_e}};
    p.constraint["attempts"] = attempt + 1;
    return p;
  }
  throw VerificationError("record " + record.id + ": " + last_problem + " after " +
                          std::to_string(opts.max_attempts) + " attempts");
}

PreferencePair build_positive_pair(const ReviewRecord& record, PositiveType t, corpus::Annotator& annotator, Rng& rng,
                                   const PairOptions& opts) {
  if (t == PositiveType::P5) throw ValidationError("build_positive_pair: mixed reviews (P5) get no pair");
  const std::string style = (t == PositiveType::P1 || t == PositiveType::P4) ? "tailored" : "template";
  PreferencePair p = base_pair(record, opts);
  p.type = to_string(t);
  const std::uint64_t nonce = rng();
  for (int attempt = 0; attempt < opts.max_attempts; ++attempt) {
    const std::string text = generate(annotator, "positive_response", positive_generation_prompt(record, style),
                                      {{"id", record.id},
                                       {"review", record.review_text},
                                       {"facts", record.context_facts},
                                       {"style", style},
                                       {"attempt", attempt},
                                       {"nonce", nonce}});
    if (text.empty() || text == p.preferred) continue;
    p.less_preferred = text;
    p.constraint = {{"style", style}, {"attempts", attempt + 1}};
    return p;
  }
  throw VerificationError("record " + record.id + ": no distinct " + style + " response after " +
                          std::to_string(opts.max_attempts) + " attempts");
}

std::optional<PreferencePair> construct_pair(const ReviewRecord& record, const Classification& c,
                                             corpus::Annotator& annotator, std::uint64_t seed,
                                             const PairOptions& opts) {
  if (!c.type || !c.flag.empty()) return std::nullopt;
  Rng rng(derive_seed(seed, record.id));
  if (auto nt = parse_negative_type(*c.type)) {
    if (*nt == NegativeType::T4) return std::nullopt;
    if (*nt != NegativeType::T3) return build_negative_pair(record, *nt, sample_cue_constraint(*nt, rng), annotator, rng, opts);
    auto [rational_only, emotional_only] = sample_t3_constraints(rng);
    auto a = build_negative_pair(record, *nt, rational_only, annotator, rng, opts);
    auto b = build_negative_pair(record, *nt, emotional_only, annotator, rng, opts);
    const int keep = static_cast<int>(rng() % 2);
    PreferencePair out = keep == 0 ? a : b;
    out.constraint["candidates"] = {a.constraint, b.constraint};
    out.constraint["kept"] = keep;
    return out;
  }
  if (auto pt = parse_positive_type(*c.type)) {
    if (*pt == PositiveType::P5) return std::nullopt;
    return build_positive_pair(record, *pt, annotator, rng, opts);
  }
  return std::nullopt;
}

std::string complaint_prompt(const std::string& review) {
  return "Please read the following complaint posted by a customer on a social media site and answer the following "
         "questions using only \"Yes\" or \"No\".\n\n"
         "The user's comment is: " +
         review +
         "\n\n"
         "Questions are listed as follows:\n\n"
         "1. In this comment, the customer feels that he/she was treated differently compared with other customers.\n"
         "2. In this comment, the customer feels that he/she is not getting what he/she deserves.\n"
         "3. In this comment, the customer considers that the service does not meet his/her requirements.\n"
         "4. In this comment, the customer complains that the hotel was slow to fix the service failures he/she "
         "faced.\n"
         "5. In this comment, the customer complains that the hotel policies were rigid and were not adapted to suit "
         "his/her situation.\n"
         "6. In this comment, the customer complains about the difficulty of finding the hotel personnel to complain "
         "about their problems.\n"
         "7. In this comment, the customer complains about the courtesy and/or manners of the service personnel.\n"
         "8. In this comment, the customer complains that the service personnel do not try hard to address his/her "
         "problem.\n"
         "9. In this comment, the customer complains that the service personnel were not caring and did not provide "
         "individual attention.\n\n"
         "The response format should be in JSON format with the key as the question index and the value as the answer "
         "(Yes or No). When answering the questions, you should carefully check whether the condition in each question "
         "is satisfied. You should also provide explanations for the answers with the key as the explanations.\n";
}

std::string positive_type_prompt(const std::string& review) {
  return "Your task is to characterize consumer comments about a hotel in an online forum. Please read the following "
         "comments posted by a customer in an online forum and answer the following questions using only \"Yes\" or "
         "\"No\".\n\n"
         "The user's comment is: " +
         review +
         "\n\n"
         "Questions are listed as follows:\n\n"
         "Please answer questions 4-6 with only One 'Yes'.\n\n"
         "1. In this comment, the customer mentions *Only* the positive aspects about this hotel. The positive aspects "
         "pertain specifically to this hotel, rather than to other hotels.\n"
         "2. In this comment, the customer mentions *Only* the negative aspects about this hotel. The negative aspects "
         "pertain specifically to this hotel, rather than to other hotels.\n"
         "3. In this comment, the customer mentions *Both* the positive and the negative aspects about this hotel. The "
         "positive aspects and negative aspects pertain specifically to this hotel, rather than to other hotels.\n"
         "4. In this comment, the customer talks about the hotel *Only* based on the characteristics of goods or "
         "services that can be evaluated independently by other customers (e.g., \"The hotel is clean, and the staff "
         "is friendly\", other customers can evaluate these product and service features.). At the same time, the "
         "comment does not contain any subjective criteria.\n"
         "5. In this comment, the customer talks about the hotel *Only* based on her/his subjective criteria "
         "established by and related to herself/himself (e.g., \"We just returned from a relaxing and enjoyable stay "
         "at the hotel\", these emotional feelings can not be evaluated by other customers). At the same time, the "
         "comment does not contain any objective criteria.\n"
         "6. In this comment, the customer talks about the hotel using *Both* subjective and objective criteria.\n\n"
         "The response format should be in JSON format with the key as the question index and the value as the answer "
         "(Yes or No). When answering the questions, you should carefully check whether the condition in each question "
         "is satisfied. You should also provide explanations for the answers with the key as the explanations.\n";
}

namespace {

const char* cue_description(int c) {
  static const char* kDesc[8] = {
      "The manager details the underlying reasons why these problems faced by the customers occurred.",
      "The manager provides compensation to the customer in response to the complaints such as refunds, free gifts, "
      "coupons, and discounts.",
      "The manager facilitates complaint handling by making explicit the policies and procedures to the customer.",
      "The manager stresses the features of the hotel and/or the quality of its staff.",
      "The manager expresses an apology for the service failure.",
      "The manager expresses appreciation for the customer patronaging the hotel.",
      "The manager shows respect, politeness and/or empathy towards the customer.",
      "The manager encourages the customer to write in the future with other comments.",
  };
  return kDesc[c];
}

std::string cue_list(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) out += "- " + n + ": " + cue_description(lex::cue_index(n)) + "\n";
  return out;
}

std::string numbered_facts(const ReviewRecord& r) {
  std::string out;
  for (std::size_t i = 0; i < r.context_facts.size(); ++i) out += std::to_string(i + 1) + ". " + r.context_facts[i] + "\n";
  return out;
}

}  // namespace

std::string negative_generation_prompt(const ReviewRecord& record, const CueConstraint& c) {
  std::vector<std::string> include = c.rational;
  include.insert(include.end(), c.emotional.begin(), c.emotional.end());
  return "I want you to act as a hotel manager to respond to a customer's review.\n\n"
         "You know the following facts about the customer and the hotel:\n\n" +
         numbered_facts(record) +
         "\nThe response MUST be specific to the customer review and MUST contain sufficient evidence to justify All "
         "the following cues accurately and explicitly:\n\n" +
         cue_list(include) +
         "\nAt the same time, the response MUST NOT contain any evidence of the following cues. Otherwise, you will be "
         "penalized.\n\n" +
         cue_list(c.excluded()) +
         "\nThe response should be in a single paragraph. After providing the response, first, for each of the above 8 "
         "cue types, answer if it is applied using \"Yes\" or \"No\" according to its definition. Then justify how they "
         "were applied using evidence in your response if your answer is \"Yes\". Both the managerial response and the "
         "explanations should be in JSON format with the keys \"Response\" and \"Explanation\" respectively.\n\n"
         "Customer review: " +
         record.review_text + "\n\nYour response to the customer review:";
}

std::string positive_generation_prompt(const ReviewRecord& record, const std::string& style) {
  const std::string head =
      style == "template"
          ? "When responding to a customer's review, provide a standard, generic response that could apply to any "
            "review, regardless of its content. The response should not be tailored to any specific details of the "
            "customer's review. You must avoid mentioning any specific aspect of the review. This approach should be "
            "consistent in every response, regardless of the nature of the review."
          : "I want you to act as a hotel manager responding to a customer's review. The response Must be customized "
            "to the customer's review.";
  return head +
         "\n\nThe response should be in a single paragraph. After providing the response, provide explanations to "
         "justify you do not tailor the response to the customer review. Both the managerial response and the "
         "explanations should be in JSON format with the keys \"Response\" and \"Explanation\" respectively.\n\n"
         "#customer's review#\n\n" +
         record.review_text + "\n\nYour response is:";
}

std::string cue_identification_prompt(const std::string& review, const std::string& response) {
  return "Please read the following complaint posted by a customer on a social media site.\n\n"
         "The user's comment is:\n\n" +
         review +
         "\n\nWe would also like you to characterize the managerial response to the above-mentioned customer "
         "complaint. Please read the following content posted by a hotel manager on the same social media site and "
         "answer the following questions carefully.\n\n"
         "The managerial response to the above user comment is:\n\n" +
         response +
         "\n\nQuestions are listed as follows:\n\n"
         "1. In this comment, the manager offers explanations as to why the problem faced by the customer occurred.\n"
         "2. In this comment, the manager provides redress or compensation for the hardship faced by the customer.\n"
         "3. In this comment, the manager refers to the complaint handling policies and procedures of the hotel.\n"
         "4. In this comment, the manager stresses the features of the hotel and/or the quality of its staff.\n"
         "5. In this comment, the manager expresses an apology for the service failure.\n"
         "6. In this comment, the manager expresses appreciation for the customer patronizing the hotel.\n"
         "7. In this comment, the manager shows respect, politeness and/or empathy towards the customer.\n"
         "8. In this comment, the manager encourages the customer to write in the future with other comments.\n\n"
         "You should first provide your answer to each of the questions. Then, you should provide comprehensive "
         "explanations for your answers. Your response should be in JSON format with keys as answers and explanations "
         "respectively.\n";
}

std::string style_identification_prompt(const std::string& review, const std::string& response) {
  return "Please read the following positive review posted by a customer and the managerial response to it.\n\n"
         "The user's comment is:\n\n" +
         review + "\n\nThe managerial response is:\n\n" + response +
         "\n\nDecide whether the response is a template response (a standard, generic response that could apply to "
         "any review and mentions no specific aspect of it) or a tailored response (customized to the specific "
         "content of the review). Reply in JSON format with the key \"style\" and the value \"template\" or "
         "\"tailored\".\n";
}

}  // namespace prefalign::pairgen
