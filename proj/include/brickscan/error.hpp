#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace brickscan {

enum class ErrorCode {
  InvalidArgument,
  Io,
  PatternOverlap,
  PatternShape,
  PatternToken,
  GridPitchMismatch,
  ObjFace,
  ObjIndex,
  ObjSyntax,
  EmptyMesh,
  RectBounds,
  SingleClass,
  StageInfeasible,
  FlatTemplate,
  NegativePoolExhausted,
  ManifestSchema,
  FormatMismatch,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above; the
/// message is prefixed with the code name.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace brickscan
