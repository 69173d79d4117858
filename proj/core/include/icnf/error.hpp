#pragma once

#include <stdexcept>
#include <string>

namespace icnf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor shapes passed to an op.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the autodiff tape (non-scalar loss, reused graph, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed or invariant-violating input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint or file format problem.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace icnf
