#pragma once

#include <functional>
#include <string>

#include "prefalign/corpus/annotator.hpp"

namespace prefalign::corpus {

struct HttpAnnotatorConfig {
  std::string endpoint;  // http://host:port/path
  double timeout_s = 30.0;
  int retries = 3;  // extra attempts after the first
  int backoff_ms = 500;
  double backoff_factor = 2.0;
  /// Environment variable holding the bearer credential.
  std::string key_env = "PREFALIGN_ANNOTATOR_KEY";
};

/// POSTs {"prompt", "max_tokens", "temperature"} and reads {"text"}.
/// Transport errors, 429 and 5xx are retried with exponential backoff;
/// other statuses fail at once. The credential is sent as a bearer token
/// and never appears in logs or error messages.
class HttpAnnotator : public Annotator {
 public:
  explicit HttpAnnotator(HttpAnnotatorConfig cfg);
  std::string complete(const AnnotatorRequest& request) override;

  /// Replaces the sleep used between retries (tests pass a no-op).
  void set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }
  bool has_key() const noexcept { return !key_.empty(); }

 private:
  HttpAnnotatorConfig cfg_;
  std::string origin_;
  std::string path_;
  std::string key_;
  std::function<void(int)> sleeper_;
};

}  // namespace prefalign::corpus
