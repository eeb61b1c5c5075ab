#include "earnet/error.hpp"

namespace earnet {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroTotalWeight: return "ZeroTotalWeight";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::InsufficientObservations: return "InsufficientObservations";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::ImplausibleGain: return "ImplausibleGain";
    case ErrorCode::CoincidentPositions: return "CoincidentPositions";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::NoPeak: return "NoPeak";
    case ErrorCode::ZeroEnergy: return "ZeroEnergy";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace earnet
