#pragma once

#include <stdexcept>

namespace subprobe {

// Invalid configuration or parameter values (bad intervals, band edges, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input data violates an operation's precondition (bounds, dimensions, labels).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File parsing or serialization problem.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A numeric routine failed to produce a finite, well-defined result.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace subprobe
