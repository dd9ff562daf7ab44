#pragma once

#include <functional>
#include <string>

namespace prefalign {

enum class LogLevel { Debug = 0, Info = 1, Warn = 2, Error = 3, Off = 4 };

void set_log_level(LogLevel level);
LogLevel log_level();
/// Replaces the stderr sink (tests capture warnings this way). Pass an empty
/// function to restore the default.
void set_log_sink(std::function<void(LogLevel, const std::string&)> sink);

void log_message(LogLevel level, const std::string& msg);
inline void log_info(const std::string& msg) { log_message(LogLevel::Info, msg); }
inline void log_warn(const std::string& msg) { log_message(LogLevel::Warn, msg); }

}  // namespace prefalign
