#include "brickscan/error.hpp"

namespace brickscan {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::PatternOverlap: return "PatternOverlap";
    case ErrorCode::PatternShape: return "PatternShape";
    case ErrorCode::PatternToken: return "PatternToken";
    case ErrorCode::GridPitchMismatch: return "GridPitchMismatch";
    case ErrorCode::ObjFace: return "ObjFace";
    case ErrorCode::ObjIndex: return "ObjIndex";
    case ErrorCode::ObjSyntax: return "ObjSyntax";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::RectBounds: return "RectBounds";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::StageInfeasible: return "StageInfeasible";
    case ErrorCode::FlatTemplate: return "FlatTemplate";
    case ErrorCode::NegativePoolExhausted: return "NegativePoolExhausted";
    case ErrorCode::ManifestSchema: return "ManifestSchema";
    case ErrorCode::FormatMismatch: return "FormatMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace brickscan
