#pragma once

#include <stdexcept>
#include <string>

namespace archlab {

enum class ErrorKind {
  Dimension,
  Degenerate,
  Parameter,
  Numerical,
  Io,
  Parse,
  SchemaVersion,
  MissingGroundTruth,
  Shape,
  Graph,
  InsufficientPoints,
};

inline const char *to_string(ErrorKind kind) noexcept {
  switch (kind) {
  case ErrorKind::Dimension: return "DimensionError";
  case ErrorKind::Degenerate: return "DegenerateError";
  case ErrorKind::Parameter: return "ParameterError";
  case ErrorKind::Numerical: return "NumericalError";
  case ErrorKind::Io: return "IoError";
  case ErrorKind::Parse: return "ParseError";
  case ErrorKind::SchemaVersion: return "SchemaVersionError";
  case ErrorKind::MissingGroundTruth: return "MissingGroundTruth";
  case ErrorKind::Shape: return "ShapeError";
  case ErrorKind::Graph: return "GraphError";
  case ErrorKind::InsufficientPoints: return "InsufficientPoints";
  }
  return "Error";
}

/// Single exception type for the library; the kind selects the category
/// (and the CLI exit code).
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &message) {
  throw Error(kind, message);
}

} // namespace archlab
