#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hops {

/// Failure categories raised by the engine. Every thrown hops::Error carries one.
enum class Errc {
  // dataset / format
  ZeroRow,
  DimensionMismatch,
  InsufficientClassCount,
  InvalidParam,
  MissingLabels,
  BadMagic,
  VersionUnsupported,
  TruncatedFile,
  ChecksumMismatch,
  MalformedFile,
  IoFailure,
  // corruption
  InvalidL,
  EmptyClass,
  RateNotIntegral,
  EmptyClassAfterDecay,
  // ldf
  KTooLarge,
  EmptyMultiset,
  // gop
  EmptyRow,
  ProbNotNormalized,
  InfeasibleColumn,
  InfeasibleRow,
  NonFiniteScaling,
  SupportViolation,
  ZeroRowMass,
  TooLarge,
  // prompt head / trainer
  WeightViolation,
  UnknownLoss,
  ConfigInvalid,
  LengthMismatch,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void raise(Errc code, const std::string& detail);

}  // namespace hops
