#pragma once

#include <stdexcept>
#include <string>

namespace phasemetric {

enum class ErrorCode {
  Parse,
  InvalidArgument,
  NotOnCharacteristicSet,
  Unreachable,
  NonFinite,
  FlowEscaped,
  QuadratureNonConvergence,
  PotentialInconsistent,
  UnknownEntry,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "PARSE";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::NotOnCharacteristicSet: return "NOT_ON_CHARACTERISTIC_SET";
    case ErrorCode::Unreachable: return "UNREACHABLE";
    case ErrorCode::NonFinite: return "NON_FINITE";
    case ErrorCode::FlowEscaped: return "FLOW_ESCAPED";
    case ErrorCode::QuadratureNonConvergence: return "QUADRATURE_NON_CONVERGENCE";
    case ErrorCode::PotentialInconsistent: return "POTENTIAL_INCONSISTENT";
    case ErrorCode::UnknownEntry: return "UNKNOWN_ENTRY";
  }
  return "UNKNOWN";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace phasemetric
