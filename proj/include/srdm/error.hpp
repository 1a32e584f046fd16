#pragma once

// Exception hierarchy shared by every srdm module. Each error carries a kind
// so the CLI can map it onto an exit code without string matching.

#include <stdexcept>
#include <string>

namespace srdm {

enum class ErrorKind {
  kParse,
  kContinuity,
  kValidation,
  kConfiguration,
  kDimension,
  kInsufficientData,
  kTraining,
  kIndex,
  kDependency,
  kCoverage,
  kDegenerateInput,
  kIo,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kContinuity: return "continuity error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kConfiguration: return "configuration error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kTraining: return "training error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kDependency: return "dependency error";
    case ErrorKind::kCoverage: return "coverage error";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

/**
 * @brief Base exception for all library failures.
 */
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
 public:
  explicit KindedError(const std::string& message) : Error(K, message) {}
};

using ParseError = KindedError<ErrorKind::kParse>;
using ContinuityError = KindedError<ErrorKind::kContinuity>;
using ValidationError = KindedError<ErrorKind::kValidation>;
using ConfigError = KindedError<ErrorKind::kConfiguration>;
using DimensionError = KindedError<ErrorKind::kDimension>;
using InsufficientDataError = KindedError<ErrorKind::kInsufficientData>;
using TrainingError = KindedError<ErrorKind::kTraining>;
using IndexError = KindedError<ErrorKind::kIndex>;
using DependencyError = KindedError<ErrorKind::kDependency>;
using CoverageError = KindedError<ErrorKind::kCoverage>;
using DegenerateInputError = KindedError<ErrorKind::kDegenerateInput>;
using IoError = KindedError<ErrorKind::kIo>;

}  // namespace srdm
