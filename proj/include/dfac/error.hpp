#pragma once

#include <stdexcept>
#include <string>

namespace dfac {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched tensor shapes, supports, or dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the domain of an operation (probability level outside
/// [0,1], negative weight, non-finite value, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, configs and checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operations invoked in the wrong order (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfac
