#pragma once

#include <stdexcept>
#include <string>

namespace lensforge {

// Base class for all library failures. The CLI maps these onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape/schema mismatch between two objects that must agree.
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Malformed or out-of-range configuration (spec, catalog, sensor files).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegenerateDispersionError : public Error {
 public:
  using Error::Error;
};

// Paraxial power is (numerically) zero: EFL/BFL undefined.
class DegeneratePowerError : public Error {
 public:
  using Error::Error;
};

// Ray aiming could not put the chief ray through the stop for a field.
class FieldUnreachableError : public Error {
 public:
  using Error::Error;
};

// A lens that cannot produce any valid ray at a requested configuration.
class UnphysicalError : public Error {
 public:
  using Error::Error;
};

}  // namespace lensforge
