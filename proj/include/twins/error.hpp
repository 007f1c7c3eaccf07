#pragma once

#include <stdexcept>
#include <string>

namespace twins {

/// Raised for out-of-domain arguments to pure model functions.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Scenario / configuration problems. Carries an optional 1-based source line.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0, const std::string& source = "")
      : std::runtime_error(format(what, line, source)), line_(line) {}
  int line() const { return line_; }

 private:
  static std::string format(const std::string& what, int line, const std::string& source) {
    std::string where = source;
    if (line > 0) where += (where.empty() ? "line " : ":") + std::to_string(line);
    return where.empty() ? what : where + ": " + what;
  }

  int line_;
};

/// A deployment that cannot be driven into the critical state.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace twins
