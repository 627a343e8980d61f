#pragma once

#include <stdexcept>
#include <string>

namespace radmesh {

enum class ErrorCode {
  InsufficientPoints,
  AllCoplanar,
  DegenerateTet,
  OutOfBounds,
  DimensionMismatch,
  NonFiniteGradient,
  InsufficientViews,
  EmptySelection,
  Io,
  Format,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::AllCoplanar: return "AllCoplanar";
    case ErrorCode::DegenerateTet: return "DegenerateTet";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::InsufficientViews: return "InsufficientViews";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

}  // namespace radmesh
