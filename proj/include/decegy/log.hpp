#pragma once

#include <string_view>

namespace decegy::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

// Initialised from the DECEGY_LOG environment variable on first use
// (debug|info|warn|error|off, default warn).
Level level();
void set_level(Level lvl);

void write(Level lvl, std::string_view msg);

inline void debug(std::string_view msg) { write(Level::debug, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace decegy::log
