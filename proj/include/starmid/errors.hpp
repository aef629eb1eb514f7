#pragma once

#include <stdexcept>
#include <string>

namespace starmid {

// Malformed input file (CSV/JSON). Carries a 1-based line number when known.
struct ParseError : std::runtime_error {
  int line = 0;
  explicit ParseError(const std::string& msg, int line_no = 0)
      : std::runtime_error(line_no > 0 ? "line " + std::to_string(line_no) + ": " + msg : msg),
        line(line_no) {}
};

// A configuration field violates a documented invariant. Message names the field.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Numeric breakdown mid-computation (non-finite values, non-PSD Gram, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace starmid
