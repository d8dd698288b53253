#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fisco {

enum class ErrorCode {
  // entailment
  BackendUnavailable,
  EmptyDecomposition,
  MissingProvenance,
  // similarity
  EmptyVerdicts,
  ZeroClaims,
  // stats
  GroupTooSmall,
  SampleTooSmall,
  InvalidDf,
  InsufficientPairs,
  LengthMismatch,
  // promptgen
  UnboundPlaceholder,
  PoolExhausted,
  InvalidTemplate,
  // collector
  AuthError,
  RateLimited,
  MalformedReply,
  UnderfilledGroup,
  // synthgen
  IndexOutOfRange,
  ConflictingOps,
  // baselines
  EmptySequence,
  // configuration, files and argument checks
  ConfigError,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the toolkit carries one of the codes above so
/// callers (notably the CLI exit-code mapping) can dispatch without parsing
/// messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fisco
