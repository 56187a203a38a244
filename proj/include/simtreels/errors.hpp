#pragma once

#include <stdexcept>
#include <string>

namespace simtreels {

/// Base class for all library errors. `category()` gives a short stable
/// token used for machine-parsable diagnostics and CLI exit codes.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual const char* category() const noexcept { return "error"; }
};

/// Invalid or inconsistent configuration / parameters.
class ConfigError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "config"; }
};

/// An operation that requires points was given an empty cloud.
class EmptyCloudError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "empty_cloud"; }
};

/// Mesh with no usable surface (zero total area, no faces, bad indices).
class DegenerateMeshError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "degenerate_mesh"; }
};

/// Random placement could not satisfy the spacing constraint within the
/// attempt budget.
class PlacementFailureError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "placement_failure"; }
};

/// File could not be opened, read, written or parsed.
class IoError : public Error {
public:
  using Error::Error;
  const char* category() const noexcept override { return "io"; }
};

}  // namespace simtreels
