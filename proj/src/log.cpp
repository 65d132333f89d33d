#include "decegy/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <string>

namespace decegy::log {
namespace {

Level parse_env() {
  const char* raw = std::getenv("DECEGY_LOG");
  if (raw == nullptr) return Level::warn;
  const std::string v(raw);
  if (v == "debug") return Level::debug;
  if (v == "info") return Level::info;
  if (v == "error") return Level::error;
  if (v == "off") return Level::off;
  return Level::warn;
}

std::atomic<Level>& current() {
  static std::atomic<Level> lvl{parse_env()};
  return lvl;
}

constexpr std::string_view tag(Level lvl) {
  switch (lvl) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}

}  // namespace

Level level() { return current().load(); }
void set_level(Level lvl) { current().store(lvl); }

void write(Level lvl, std::string_view msg) {
  if (lvl < level() || lvl == Level::off) return;
  std::cerr << "decegy: " << tag(lvl) << ": " << msg << '\n';
}

}  // namespace decegy::log
