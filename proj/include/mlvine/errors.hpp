#pragma once

#include <stdexcept>
#include <string>

namespace mlv {

/// Malformed or inconsistent run configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violating the panel contract (CSV syntax, balance, scale).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Too many failed fits in a batch (replications or bootstrap refits).
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mlv
