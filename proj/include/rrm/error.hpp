#pragma once

#include <stdexcept>
#include <string>

namespace rrm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on caller-supplied data was violated.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A file did not follow the expected on-disk layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed at the OS level.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A computation produced a non-finite value.
class NumericFailure : public Error {
 public:
  using Error::Error;
};

/// The verification oracles only handle tiny problems.
class UnsupportedScale : public Error {
 public:
  using Error::Error;
};

}  // namespace rrm
