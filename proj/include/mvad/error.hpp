#pragma once

#include <stdexcept>
#include <string>

namespace mvad {

enum class ErrorKind {
  InvalidInput,
  NotPositiveDefinite,
  DegenerateDirection,
  SingularUpdate,
  InvalidFactor,
  InsufficientData,
  UninitializedState,
  DegenerateTruth,
};

const char* to_string(ErrorKind kind) noexcept;

// All library failures are reported through this type; `kind()` lets callers
// branch on recoverable conditions (e.g. skip a degenerate update).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mvad
