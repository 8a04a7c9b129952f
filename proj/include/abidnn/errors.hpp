#pragma once

#include <stdexcept>
#include <string>

namespace abidnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An invalid argument or model/problem combination detected before any work starts.
class ConfigurationError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A non-differentiable primitive was used inside a differentiated computation.
class UnsupportedOperation : public Error {
 public:
  explicit UnsupportedOperation(const std::string& op)
      : Error("unsupported operation in differentiated expression: " + op) {}
};

/// Loss or gradient became NaN/Inf during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed checkpoint, config, or report file. The message names the offending field.
class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace abidnn
