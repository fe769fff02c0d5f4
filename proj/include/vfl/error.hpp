#pragma once

#include <stdexcept>
#include <string>

namespace vfl {

/// Base class for errors surfaced by the run pipeline.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Time integration could not proceed (step underflow, non-finite state).
class NumericalAbort : public Error {
 public:
  using Error::Error;
};

/// File system failure; the message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace vfl
