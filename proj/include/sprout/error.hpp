#pragma once

#include <stdexcept>
#include <string>

namespace sprout {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or layer shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A value outside its documented domain (bad hyperparameter, bad label, ...).
class ValueError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File system or decode failure.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed archive, CSV or config content.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace sprout
