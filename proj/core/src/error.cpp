#include "hops/error.hpp"

namespace hops {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::ZeroRow: return "ZeroRow";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::InsufficientClassCount: return "InsufficientClassCount";
    case Errc::InvalidParam: return "InvalidParam";
    case Errc::MissingLabels: return "MissingLabels";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionUnsupported: return "VersionUnsupported";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::ChecksumMismatch: return "ChecksumMismatch";
    case Errc::MalformedFile: return "MalformedFile";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvalidL: return "InvalidL";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::RateNotIntegral: return "RateNotIntegral";
    case Errc::EmptyClassAfterDecay: return "EmptyClassAfterDecay";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::EmptyMultiset: return "EmptyMultiset";
    case Errc::EmptyRow: return "EmptyRow";
    case Errc::ProbNotNormalized: return "ProbNotNormalized";
    case Errc::InfeasibleColumn: return "InfeasibleColumn";
    case Errc::InfeasibleRow: return "InfeasibleRow";
    case Errc::NonFiniteScaling: return "NonFiniteScaling";
    case Errc::SupportViolation: return "SupportViolation";
    case Errc::ZeroRowMass: return "ZeroRowMass";
    case Errc::TooLarge: return "TooLarge";
    case Errc::WeightViolation: return "WeightViolation";
    case Errc::UnknownLoss: return "UnknownLoss";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::LengthMismatch: return "LengthMismatch";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

void raise(Errc code, const std::string& detail) { throw Error(code, detail); }

}  // namespace hops
