#include "fisco/errors.hpp"

namespace fisco {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::EmptyDecomposition: return "EmptyDecomposition";
    case ErrorCode::MissingProvenance: return "MissingProvenance";
    case ErrorCode::EmptyVerdicts: return "EmptyVerdicts";
    case ErrorCode::ZeroClaims: return "ZeroClaims";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::SampleTooSmall: return "SampleTooSmall";
    case ErrorCode::InvalidDf: return "InvalidDf";
    case ErrorCode::InsufficientPairs: return "InsufficientPairs";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::UnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::PoolExhausted: return "PoolExhausted";
    case ErrorCode::InvalidTemplate: return "InvalidTemplate";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedReply: return "MalformedReply";
    case ErrorCode::UnderfilledGroup: return "UnderfilledGroup";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::ConflictingOps: return "ConflictingOps";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace fisco
