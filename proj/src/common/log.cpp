#include "prefalign/common/log.hpp"

#include <iostream>
#include <mutex>

namespace prefalign {

namespace {
std::mutex g_mu;
LogLevel g_level = LogLevel::Info;
std::function<void(LogLevel, const std::string&)> g_sink;

const char* tag(LogLevel l) {
  switch (l) {
    case LogLevel::Debug: return "debug";
    case LogLevel::Info: return "info";
    case LogLevel::Warn: return "warn";
    case LogLevel::Error: return "error";
    default: return "";
  }
}
}  // namespace

void set_log_level(LogLevel level) {
  std::lock_guard<std::mutex> lock(g_mu);
  g_level = level;
}

LogLevel log_level() {
  std::lock_guard<std::mutex> lock(g_mu);
  return g_level;
}

void set_log_sink(std::function<void(LogLevel, const std::string&)> sink) {
  std::lock_guard<std::mutex> lock(g_mu);
  g_sink = std::move(sink);
}

void log_message(LogLevel level, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_mu);
  if (level < g_level) return;
  if (g_sink) {
    g_sink(level, msg);
  } else {
    std::cerr << "[" << tag(level) << "] " << msg << '\n';
  }
}

}  // namespace prefalign
