#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gramufen {

enum class Errc {
  EmptyText,
  EmptyCorpus,
  EmptyBatch,
  IdOutOfRange,
  DimensionMismatch,
  EmptyGraph,
  BackboneWeightsMissing,
  InvalidLabel,
  ParseError,
  MissingImageRoot,
  TooFewSamples,
  DecodeError,
  NonFiniteLoss,
  LengthMismatch,
  CheckpointMismatch,
  EmptyHistory,
  InvalidConfig,
  IoError,
};

inline std::string_view errc_name(Errc c) {
  switch (c) {
    case Errc::EmptyText: return "EmptyText";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::EmptyBatch: return "EmptyBatch";
    case Errc::IdOutOfRange: return "IdOutOfRange";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyGraph: return "EmptyGraph";
    case Errc::BackboneWeightsMissing: return "BackboneWeightsMissing";
    case Errc::InvalidLabel: return "InvalidLabel";
    case Errc::ParseError: return "ParseError";
    case Errc::MissingImageRoot: return "MissingImageRoot";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::DecodeError: return "DecodeError";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::CheckpointMismatch: return "CheckpointMismatch";
    case Errc::EmptyHistory: return "EmptyHistory";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind rather than on message text.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gramufen
