#pragma once

#include <stdexcept>
#include <string>

namespace marketrank {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "Error"; }
};

struct NonPositiveDimension : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "NonPositiveDimension"; }
};

struct DegenerateProbability : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "DegenerateProbability"; }
};

struct TimeOrderViolation : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "TimeOrderViolation"; }
};

struct DimensionMismatch : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "DimensionMismatch"; }
};

// Two fields keyed to structurally different trees were combined.
struct TreeMismatch : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "TreeMismatch"; }
};

struct NotContained : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "NotContained"; }
};

struct RankOutOfRange : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "RankOutOfRange"; }
};

struct NotAMartingale : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "NotAMartingale"; }
};

// Market spec text errors carry a 1-based source location.
struct SyntaxError : Error {
  SyntaxError(const std::string& what, int line_, int col_)
      : Error("line " + std::to_string(line_) + ", col " + std::to_string(col_) +
              ": " + what),
        line(line_),
        col(col_) {}
  const char* kind() const noexcept override { return "SyntaxError"; }
  int line;
  int col;
};

struct UnknownIdentifier : Error {
  UnknownIdentifier(const std::string& what, int line_, int col_)
      : Error("line " + std::to_string(line_) + ", col " + std::to_string(col_) +
              ": " + what),
        line(line_),
        col(col_) {}
  const char* kind() const noexcept override { return "UnknownIdentifier"; }
  int line;
  int col;
};

struct ShapeError : Error {
  using Error::Error;
  const char* kind() const noexcept override { return "ShapeError"; }
};

}  // namespace marketrank
