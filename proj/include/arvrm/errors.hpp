#pragma once

#include <stdexcept>
#include <string>

namespace arvrm {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor/operation shape mismatch; the message names both shapes.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid input data (non-finite coordinate, empty text, bad gripper value).
struct InputError : Error {
  using Error::Error;
};

/// Sequence exceeds the configured maximum length.
struct CapacityError : Error {
  using Error::Error;
};

/// File format, version, or corruption problems.
struct IoError : Error {
  using Error::Error;
};

/// Bad or inconsistent run configuration (including fingerprint mismatches).
struct ConfigError : Error {
  using Error::Error;
};

/// Non-finite gradients or losses during optimization.
struct TrainError : Error {
  using Error::Error;
};

/// Infeasible task specification (e.g. object outside arm reach).
struct GenerationError : Error {
  using Error::Error;
};

/// Writes a warning line to stderr. Used for non-fatal contract edges
/// (zero-norm cosine, all-zero map column, window truncation).
void log_warn(const std::string& message);

}  // namespace arvrm
