#pragma once

#include <stdexcept>
#include <string>

namespace vdn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NetworkSpec or configuration violates one of its invariants.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values reached a place that requires finite input.
class NumericError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace vdn
