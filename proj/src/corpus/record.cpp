#include "prefalign/corpus/record.hpp"

#include <cctype>
#include <fstream>
#include <set>

#include "prefalign/common/error.hpp"

namespace prefalign::corpus {

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::Negative: return "negative";
    case Polarity::Positive: return "positive";
    case Polarity::Neutral: return "neutral";
  }
  return "neutral";
}

Polarity polarity_of(int rating) {
  if (rating < 3) return Polarity::Negative;
  if (rating > 3) return Polarity::Positive;
  return Polarity::Neutral;
}

void ReviewRecord::validate() const {
  if (id.empty()) throw ValidationError("record has an empty id");
  if (rating < 1 || rating > 5) throw ValidationError("record " + id + ": rating must be in 1..5");
  for (const auto& f : context_facts) {
    if (f.empty() || f != trim(f)) throw ValidationError("record " + id + ": context facts must be non-empty and trimmed");
  }
}

nlohmann::json to_json(const ReviewRecord& r) {
  nlohmann::json j;
  j["id"] = r.id;
  j["review"] = r.review_text;
  j["response"] = r.response_text ? nlohmann::json(*r.response_text) : nlohmann::json(nullptr);
  j["rating"] = r.rating;
  j["hotel_id"] = r.hotel_id ? nlohmann::json(*r.hotel_id) : nlohmann::json(nullptr);
  if (!r.context_facts.empty()) j["facts"] = r.context_facts;
  return j;
}

namespace {

std::optional<std::string> optional_string(const nlohmann::json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) throw ParseError(std::string("field \"") + key + "\" must be a string or null", line);
  return j[key].get<std::string>();
}

}  // namespace

ReviewRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw ParseError("expected a JSON object", line);
  for (const char* key : {"id", "review", "rating"}) {
    if (!j.contains(key)) throw ParseError(std::string("missing field \"") + key + "\"", line);
  }
  if (!j["id"].is_string()) throw ParseError("field \"id\" must be a string", line);
  if (!j["review"].is_string()) throw ParseError("field \"review\" must be a string", line);
  if (!j["rating"].is_number_integer()) throw ParseError("field \"rating\" must be an integer", line);
  ReviewRecord r;
  r.id = j["id"].get<std::string>();
  r.review_text = j["review"].get<std::string>();
  r.response_text = optional_string(j, "response", line);
  r.rating = j["rating"].get<int>();
  r.hotel_id = optional_string(j, "hotel_id", line);
  if (j.contains("facts")) {
    if (!j["facts"].is_array()) throw ParseError("field \"facts\" must be an array", line);
    for (const auto& f : j["facts"]) {
      if (!f.is_string()) throw ParseError("facts must be strings", line);
      r.context_facts.push_back(f.get<std::string>());
    }
  }
  try {
    r.validate();
  } catch (const ValidationError& e) {
    throw ParseError(e.what(), line);
  }
  return r;
}

namespace {

template <class F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), no);
    }
    f(j, no);
  }
}

}  // namespace

std::vector<ReviewRecord> load_reviews(const std::filesystem::path& path) {
  std::vector<ReviewRecord> out;
  std::set<std::string> seen;
  for_each_json_line(path, [&](const nlohmann::json& j, std::size_t no) {
    auto r = record_from_json(j, no);
    if (!seen.insert(r.id).second) throw ValidationError("line " + std::to_string(no) + ": duplicate id \"" + r.id + "\"");
    out.push_back(std::move(r));
  });
  return out;
}

void save_reviews(const std::filesystem::path& path, const std::vector<ReviewRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

ContextMap load_context(const std::filesystem::path& path) {
  ContextMap out;
  for_each_json_line(path, [&](const nlohmann::json& j, std::size_t no) {
    if (!j.contains("id") || !j["id"].is_string()) throw ParseError("missing string field \"id\"", no);
    if (!j.contains("facts") || !j["facts"].is_array()) throw ParseError("missing array field \"facts\"", no);
    auto& facts = out[j["id"].get<std::string>()];
    for (const auto& f : j["facts"]) facts.push_back(f.get<std::string>());
  });
  return out;
}

void save_context(const std::filesystem::path& path, const std::vector<ReviewRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : records) out << nlohmann::json{{"id", r.id}, {"facts", r.context_facts}}.dump() << '\n';
}

void attach_context(std::vector<ReviewRecord>& records, const ContextMap& facts) {
  for (auto& r : records) {
    if (auto it = facts.find(r.id); it != facts.end()) r.context_facts = it->second;
  }
}

std::size_t word_count(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace prefalign::corpus
