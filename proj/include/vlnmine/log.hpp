#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vlnmine::log {

enum class Level { kDebug, kInfo, kWarn, kError };

using Fields = std::vector<std::pair<std::string, std::string>>;

// One event per line on stderr. In JSON mode each line is a JSON object
// {"level","event",...fields}; in plain mode a human-readable rendering of
// the same event. Thread-safe.
void emit(Level level, std::string_view event, const Fields& fields = {});

void set_json_output(bool enabled);
void set_min_level(Level level);

inline void info(std::string_view event, const Fields& fields = {}) {
  emit(Level::kInfo, event, fields);
}
inline void warn(std::string_view event, const Fields& fields = {}) {
  emit(Level::kWarn, event, fields);
}
inline void error(std::string_view event, const Fields& fields = {}) {
  emit(Level::kError, event, fields);
}
inline void debug(std::string_view event, const Fields& fields = {}) {
  emit(Level::kDebug, event, fields);
}

}  // namespace vlnmine::log
