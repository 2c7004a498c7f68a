#pragma once

#include <sstream>
#include <string_view>

namespace sgwsod::log {

enum class Level { kError = 0, kWarn = 1, kInfo = 2, kDebug = 3 };

// Threshold is read once from SGWSOD_LOG (error|warn|info|debug), default warn.
Level threshold();
void set_threshold(Level level);
void write(Level level, std::string_view message);

template <typename... Args>
void emit(Level level, const Args&... args) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::ostringstream os;
  (os << ... << args);
  write(level, os.str());
}

template <typename... Args>
void warn(const Args&... args) {
  emit(Level::kWarn, args...);
}

template <typename... Args>
void info(const Args&... args) {
  emit(Level::kInfo, args...);
}

template <typename... Args>
void debug(const Args&... args) {
  emit(Level::kDebug, args...);
}

}  // namespace sgwsod::log
