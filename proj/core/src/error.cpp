#include "conse/error.hpp"

namespace conse {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DuplicateTerm: return "DuplicateTerm";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::EmptySynonyms: return "EmptySynonyms";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::MissingSplit: return "MissingSplit";
    case ErrorCode::UnresolvedLabel: return "UnresolvedLabel";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidDistribution: return "InvalidDistribution";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::EmptyTrainSet: return "EmptyTrainSet";
    case ErrorCode::Io: return "Io";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::ZeroConseVector: return "ZeroConseVector";
    case ErrorCode::EmptyCandidateSet: return "EmptyCandidateSet";
    case ErrorCode::UniverseTooSmall: return "UniverseTooSmall";
  }
  return "Unknown";
}

bool is_degenerate(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DegenerateDistribution:
    case ErrorCode::ZeroConseVector:
    case ErrorCode::EmptyCandidateSet:
    case ErrorCode::UniverseTooSmall:
      return true;
    default:
      return false;
  }
}

}  // namespace conse
