#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conse {

enum class ErrorCode {
  // input errors
  Parse,
  DimensionMismatch,
  NonFinite,
  ZeroVector,
  DuplicateTerm,
  CountMismatch,
  DuplicateLabel,
  EmptySynonyms,
  UnknownLabel,
  MissingSplit,
  UnresolvedLabel,
  InvalidArgument,
  InvalidDistribution,
  UnknownNode,
  InvalidEdge,
  EmptyTrainSet,
  Io,
  // degenerate data
  DegenerateDistribution,
  ZeroConseVector,
  EmptyCandidateSet,
  UniverseTooSmall,
};

std::string_view to_string(ErrorCode code) noexcept;

// True for errors caused by degenerate (but well-formed) data rather than
// malformed input.
bool is_degenerate(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace conse
