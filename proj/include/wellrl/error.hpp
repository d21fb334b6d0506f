#pragma once

#include <stdexcept>
#include <string>

namespace wellrl {

/// Invalid or incomplete run configuration. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Linear-solver breakdown, non-finite loss, failed factorization. Maps to CLI exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace wellrl
