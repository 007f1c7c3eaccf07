#pragma once

// stderr logging; verbosity from TWINS_LOG (error | warn | info | debug, or 0-3).

#include <cstdlib>
#include <iostream>
#include <string>

namespace twins::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level level() {
  static const Level lvl = [] {
    const char* v = std::getenv("TWINS_LOG");
    if (!v) return Level::Warn;
    const std::string s(v);
    if (s == "error" || s == "quiet" || s == "0") return Level::Error;
    if (s == "info" || s == "2") return Level::Info;
    if (s == "debug" || s == "3") return Level::Debug;
    return Level::Warn;
  }();
  return lvl;
}

inline void write(Level at, const char* tag, const std::string& msg) {
  if (static_cast<int>(at) <= static_cast<int>(level())) std::cerr << tag << msg << '\n';
}

inline void error(const std::string& msg) { write(Level::Error, "error: ", msg); }
inline void warn(const std::string& msg) { write(Level::Warn, "warning: ", msg); }
inline void info(const std::string& msg) { write(Level::Info, "", msg); }
inline void debug(const std::string& msg) { write(Level::Debug, "debug: ", msg); }

}  // namespace twins::log
