#include "prefalign/corpus/http_annotator.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "prefalign/common/error.hpp"
#include "prefalign/common/log.hpp"

namespace prefalign::corpus {

HttpAnnotator::HttpAnnotator(HttpAnnotatorConfig cfg) : cfg_(std::move(cfg)) {
  const std::string prefix = "http://";
  if (cfg_.endpoint.rfind(prefix, 0) != 0) {
    throw ValidationError("annotator endpoint must start with http:// (TLS is not built in)");
  }
  const auto slash = cfg_.endpoint.find('/', prefix.size());
  origin_ = cfg_.endpoint.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : cfg_.endpoint.substr(slash);
  if (origin_.size() <= prefix.size()) throw ValidationError("annotator endpoint has no host");
  if (cfg_.retries < 0 || cfg_.timeout_s <= 0) throw ValidationError("annotator retries/timeout out of range");
  if (const char* k = std::getenv(cfg_.key_env.c_str())) key_ = k;
  sleeper_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

std::string HttpAnnotator::complete(const AnnotatorRequest& request) {
  if (!network_allowed()) throw AnnotatorError("network access is disabled (mock mode)");
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!key_.empty()) headers.emplace("Authorization", "Bearer " + key_);
  const std::string body =
      nlohmann::json{{"prompt", request.prompt}, {"max_tokens", request.max_tokens}, {"temperature", request.temperature}}
          .dump();

  std::string last_error;
  double wait = cfg_.backoff_ms;
  for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
    if (attempt > 0) {
      sleeper_(static_cast<int>(wait));
      wait *= cfg_.backoff_factor;
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        const auto j = nlohmann::json::parse(res->body);
        if (!j.contains("text") || !j["text"].is_string()) throw AnnotatorError("reply lacks a \"text\" string");
        return j["text"].get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw AnnotatorError(std::string("annotator reply is not JSON: ") + e.what());
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw AnnotatorError("annotator " + origin_ + path_ + " returned HTTP " + std::to_string(res->status));
    }
    log_warn("annotator request " + request.task + " attempt " + std::to_string(attempt + 1) + " failed: " + last_error);
  }
  throw AnnotatorError("annotator " + origin_ + path_ + " failed after " + std::to_string(cfg_.retries + 1) +
                       " attempts: " + last_error);
}

}  // namespace prefalign::corpus
