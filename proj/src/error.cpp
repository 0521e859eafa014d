#include "mvad/error.hpp"

namespace mvad {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::NotPositiveDefinite: return "not positive definite";
    case ErrorKind::DegenerateDirection: return "degenerate direction";
    case ErrorKind::SingularUpdate: return "singular update";
    case ErrorKind::InvalidFactor: return "invalid factor";
    case ErrorKind::InsufficientData: return "insufficient data";
    case ErrorKind::UninitializedState: return "uninitialized state";
    case ErrorKind::DegenerateTruth: return "degenerate truth";
  }
  return "unknown";
}

}  // namespace mvad
