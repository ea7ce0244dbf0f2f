#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace genfun {

enum class ErrorKind {
  OutOfGamma,
  DegenerateGz,
  NoConvergence,
  SingularJacobian,
  OutOfRange,
  NotInU,
  DegenerateGradient,
  NotGConvex,
  NotAKink,
  HypothesisUnverifiable,
  AllClipped,
  NotLocallyGConvex,
  ConfigError,
  IOError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutOfGamma: return "OutOfGamma";
    case ErrorKind::DegenerateGz: return "DegenerateGz";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::NotInU: return "NotInU";
    case ErrorKind::DegenerateGradient: return "DegenerateGradient";
    case ErrorKind::NotGConvex: return "NotGConvex";
    case ErrorKind::NotAKink: return "NotAKink";
    case ErrorKind::HypothesisUnverifiable: return "HypothesisUnverifiable";
    case ErrorKind::AllClipped: return "AllClipped";
    case ErrorKind::NotLocallyGConvex: return "NotLocallyGConvex";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IOError: return "IOError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the kinds above, so
/// callers can branch on `kind()` instead of parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace genfun
