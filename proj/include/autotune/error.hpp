#pragma once

#include <stdexcept>
#include <string>

namespace autotune {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed configuration-space definition or a config that does not fit it.
class SpaceError : public Error {
 public:
  using Error::Error;
};

/// A model could not be fitted (too few samples, degenerate design, ...).
class FitError : public Error {
 public:
  using Error::Error;
};

/// The replay backend has no record for the requested execution.
class ReplayMiss : public Error {
 public:
  using Error::Error;
};

/// A trial log, forest file, or surface file failed to parse.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The time constraint does not cover even the first execution.
class BudgetExhausted : public Error {
 public:
  using Error::Error;
};

/// A resumed run diverged from the log it was resumed from.
class ResumeMismatch : public Error {
 public:
  using Error::Error;
};

}  // namespace autotune
