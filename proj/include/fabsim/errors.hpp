#pragma once

#include <stdexcept>
#include <string>

namespace fabsim {

/// Base class for all library errors. CLI maps these to exit code 1,
/// except ConfigError which maps to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidMeshError : Error {
  using Error::Error;
};

struct DegenerateGeometryError : Error {
  using Error::Error;
};

/// Thrown when an integration step produces non-finite state.
struct InstabilityError : Error {
  using Error::Error;
};

struct InvalidInputError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct NumericError : Error {
  using Error::Error;
};

struct TrainingError : Error {
  using Error::Error;
};

struct SamplingError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace fabsim
