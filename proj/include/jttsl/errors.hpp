#pragma once

#include <stdexcept>
#include <string>

namespace jttsl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments: non-PD matrices, dimension mismatches, weight sums.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// Factorization or inversion failure inside a filter step.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Scenario file or CLI flag problems. The message carries the key path.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace jttsl
