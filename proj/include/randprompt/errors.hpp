#pragma once

#include <stdexcept>
#include <string>

namespace randprompt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad call arguments: wrong counts, shapes, or out-of-range values.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration (missing refs, bad flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file that does not parse as the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A file that parses but ends early.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

/// Well-formed input with unusable values (NaN, zero-norm rows, dim mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked on an object in the wrong state (eval before training, stale cache).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Numeric failure during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Metric undefined for the input (e.g. a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace randprompt
