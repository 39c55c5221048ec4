#pragma once

#include <stdexcept>
#include <string>

namespace vasim {

// Malformed input file or record.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the operation's domain (window bounds, filter cutoff, ...).
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid configuration or model state.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Illegal event for the current attack phase.
struct TransitionError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace vasim
