#pragma once

#include <stdexcept>
#include <string>

namespace sgwsod {

// Bad input: malformed config, invariant violation in loaded data, bad flag.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while touching the filesystem.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during a run (non-finite activations, divergence).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sgwsod
