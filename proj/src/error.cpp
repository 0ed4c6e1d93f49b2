#include "gapfinder/error.hpp"

namespace gapfinder {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MissingFile: return "MissingFile";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::UnknownLanguage: return "UnknownLanguage";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::EmptyLanguage: return "EmptyLanguage";
    case Errc::UnknownConcept: return "UnknownConcept";
    case Errc::TooFewRows: return "TooFewRows";
    case Errc::DegenerateTarget: return "DegenerateTarget";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::EmptyHistory: return "EmptyHistory";
    case Errc::InstanceTooLarge: return "InstanceTooLarge";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::NoEligibleEditors: return "NoEligibleEditors";
    case Errc::EmptyPool: return "EmptyPool";
    case Errc::StaleArtifact: return "StaleArtifact";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidSpec:
    case Errc::UnknownLanguage:
      return 2;
    case Errc::StaleArtifact:
    case Errc::SchemaMismatch:
      return 4;
    default:
      return 3;
  }
}

}  // namespace gapfinder
