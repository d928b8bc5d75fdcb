#pragma once

#include <stdexcept>
#include <string>

namespace inrv {

// Root of every error the library throws. The CLI maps the subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, unknown flags or config keys, invalid parameters.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed files, inconsistent metadata, I/O failures.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Tensor shapes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf values, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace inrv
