#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gapfinder {

enum class Errc {
  MissingFile,
  MalformedRow,
  DuplicateKey,
  InvalidSpec,
  UnknownLanguage,
  EmptyCorpus,
  ZeroVector,
  EmptyLanguage,
  UnknownConcept,
  TooFewRows,
  DegenerateTarget,
  SchemaMismatch,
  EmptyHistory,
  InstanceTooLarge,
  LengthMismatch,
  DegenerateInput,
  NoEligibleEditors,
  EmptyPool,
  StaleArtifact,
  ConfigError,
};

std::string_view errc_name(Errc code);

// Process exit code for an error class: 2 config, 3 data, 4 stale artifact.
int exit_code(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gapfinder
