#pragma once

#include <stdexcept>

namespace pointer {

/// Invalid configuration or input data. Maps to CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A run was aborted by a numerical monitor (positivity, leakage). Exit code 2.
class NumericalAbort : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace pointer
