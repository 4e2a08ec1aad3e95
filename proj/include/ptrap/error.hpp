#pragma once

#include <stdexcept>
#include <string>

namespace ptrap {

// Invalid user input: parameters, config files, CLI arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure in a solver (singular matrix, no minimum, ion lost).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ptrap
