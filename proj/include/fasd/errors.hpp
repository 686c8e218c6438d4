#pragma once

#include <stdexcept>
#include <string>

namespace fasd {

/// Malformed or out-of-range configuration.
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Input files that do not parse or violate the graph contract.
class DataError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite values, degenerate inputs) during a run.
class NumericError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fasd
