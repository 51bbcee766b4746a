#include "vlnmine/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>

#include <nlohmann/json.hpp>

namespace vlnmine::log {
namespace {

std::mutex g_mutex;
std::atomic<bool> g_json{false};
std::atomic<int> g_min_level{static_cast<int>(Level::kInfo)};

const char* level_name(Level level) {
  switch (level) {
    case Level::kDebug:
      return "debug";
    case Level::kInfo:
      return "info";
    case Level::kWarn:
      return "warn";
    case Level::kError:
      return "error";
  }
  return "info";
}

double unix_seconds() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

void set_json_output(bool enabled) { g_json = enabled; }

void set_min_level(Level level) { g_min_level = static_cast<int>(level); }

void emit(Level level, std::string_view event, const Fields& fields) {
  if (static_cast<int>(level) < g_min_level.load()) {
    return;
  }
  std::lock_guard<std::mutex> lock(g_mutex);
  if (g_json.load()) {
    nlohmann::ordered_json line;
    line["ts"] = unix_seconds();
    line["level"] = level_name(level);
    line["event"] = std::string(event);
    for (const auto& [key, value] : fields) {
      line[key] = value;
    }
    std::fprintf(stderr, "%s\n", line.dump().c_str());
  } else {
    std::string rendered;
    rendered.reserve(64);
    rendered += level_name(level);
    rendered += ' ';
    rendered += event;
    for (const auto& [key, value] : fields) {
      rendered += ' ';
      rendered += key;
      rendered += '=';
      rendered += value;
    }
    std::fprintf(stderr, "%s\n", rendered.c_str());
  }
}

}  // namespace vlnmine::log
