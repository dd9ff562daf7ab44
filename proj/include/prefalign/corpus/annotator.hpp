#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace prefalign::corpus {

/// One call to an annotation backend. Live backends see only the rendered
/// prompt; `fields` carries the structured inputs so a deterministic mock
/// can answer without parsing prose.
struct AnnotatorRequest {
  std::string task;  // quality | context | unfairness | positive_type | cues | response_style |
                     // negative_response | positive_response
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;
  nlohmann::json fields = nlohmann::json::object();
};

class Annotator {
 public:
  virtual ~Annotator() = default;
  /// Raw completion text. Throws AnnotatorError when the backend fails.
  virtual std::string complete(const AnnotatorRequest& request) = 0;
};

/// Process-wide switch checked by every networked backend before it opens a
/// connection. Mock runs turn it off.
void set_network_allowed(bool allowed);
bool network_allowed();

/// Deterministic offline annotator. Answers come from canned (task, id)
/// entries when present, otherwise from keyword rules over the shared
/// phrase banks.
class MockAnnotator : public Annotator {
 public:
  std::string complete(const AnnotatorRequest& request) override;

  void set_canned(const std::string& task, const std::string& id, std::string text);
  int calls() const noexcept { return calls_; }

 private:
  std::map<std::pair<std::string, std::string>, std::string> canned_;
  int calls_ = 0;
};

/// First JSON object embedded in free text (models often wrap JSON in prose).
nlohmann::json extract_json(const std::string& text);

/// Yes/No answers keyed "1".."n" (optionally nested under "answers").
std::vector<bool> parse_yes_no(const nlohmann::json& j, int n);

struct GeneratedResponse {
  std::string response;
  nlohmann::json explanation;
};
GeneratedResponse parse_generated(const std::string& text);

}  // namespace prefalign::corpus
