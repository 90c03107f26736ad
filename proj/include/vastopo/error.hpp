#pragma once

#include <stdexcept>
#include <string>

namespace vastopo {

// Base for every data/validation failure raised by the library. The CLI maps
// these to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or configuration value.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Tensor or volume shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// RVOL / checkpoint container problems.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Header line present but not parseable.
class HeaderError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Payload ends mid-element.
class TruncatedError : public Error {
 public:
  using Error::Error;
};

class LengthMismatchError : public Error {
 public:
  using Error::Error;
};

// A mask that should be binary contains values other than 0/1.
class NonBinaryError : public Error {
 public:
  using Error::Error;
};

// Non-finite value encountered (loss, gradient, finite-difference probe).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace vastopo
