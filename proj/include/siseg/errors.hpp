#pragma once

#include <stdexcept>
#include <string>

namespace siseg {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed weight manifest, image file or config document.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Layer shapes that do not compose, bad weight counts, non-finite weights.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite intermediate values or degenerate scalars.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Internal bookkeeping went wrong (e.g. a breakpoint behind the sweep).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

class PathExplosionError : public Error {
 public:
  using Error::Error;
};

/// The truncation region carries no probability mass in double precision.
class DegenerateRegionError : public Error {
 public:
  using Error::Error;
};

}  // namespace siseg
