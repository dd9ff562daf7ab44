#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace prefalign::corpus {

enum class Polarity { Negative, Positive, Neutral };

std::string_view to_string(Polarity p);
/// Rating below 3 is negative, above 3 positive, 3 neutral.
Polarity polarity_of(int rating);

struct ReviewRecord {
  std::string id;
  std::string review_text;
  std::optional<std::string> response_text;
  int rating = 0;
  std::optional<std::string> hotel_id;
  std::vector<std::string> context_facts;

  Polarity polarity() const { return polarity_of(rating); }
  /// Throws ValidationError on a bad rating, empty id, or untrimmed facts.
  void validate() const;
  bool operator==(const ReviewRecord&) const = default;
};

nlohmann::json to_json(const ReviewRecord& r);
/// `line` is only used for error messages.
ReviewRecord record_from_json(const nlohmann::json& j, std::size_t line = 0);

/// One JSON object per line; blank lines are skipped. Throws ParseError with
/// the offending line number, or ValidationError on a duplicate id.
std::vector<ReviewRecord> load_reviews(const std::filesystem::path& path);
void save_reviews(const std::filesystem::path& path, const std::vector<ReviewRecord>& records);

using ContextMap = std::map<std::string, std::vector<std::string>>;
/// context.jsonl: {"id", "facts": [...]} per line.
ContextMap load_context(const std::filesystem::path& path);
void save_context(const std::filesystem::path& path, const std::vector<ReviewRecord>& records);
void attach_context(std::vector<ReviewRecord>& records, const ContextMap& facts);

/// Whitespace-delimited token count.
std::size_t word_count(std::string_view text);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

}  // namespace prefalign::corpus
