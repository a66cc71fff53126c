#pragma once

#include <stdexcept>
#include <string>

namespace dfbench {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or configuration geometry that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, truncated or otherwise unreadable input data.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Lookup of a name that was never registered.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Registered name whose implementation is not shipped with this build.
class NotBundledError : public Error {
 public:
  using Error::Error;
};

// A numeric quantity is undefined for the given input (e.g. AUC of a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfbench
