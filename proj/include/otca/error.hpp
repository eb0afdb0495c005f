#pragma once

#include <stdexcept>
#include <string>

namespace otca {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent experiment configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate geometry, divergence (CLI exit code 2).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace otca
