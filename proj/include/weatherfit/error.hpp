#pragma once

#include <stdexcept>
#include <string>

namespace weatherfit {

// Base for every error raised by the library. The CLI maps the three
// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or contract violation on caller-supplied values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// File system or codec failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss, failed decomposition and similar numerical breakdowns.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace weatherfit
