#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rplift {

enum class ErrorCode {
  InvalidArgument,
  OutOfDomain,
  BehindCamera,
  Degenerate,
  DegenerateEncoding,
  DegenerateGeometry,
  SingularNormalEquations,
  UnknownInstance,
  MissingAngles,
  EmptyScene,
  FrameMismatch,
  MalformedLine,
  MissingKey,
  MalformedMatrix,
  BadMagic,
  SizeMismatch,
  UnsupportedVersion,
  UnsupportedFormat,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure the library reports carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Parse failures additionally carry a 1-based location. A field of 0 means
// the whole line (or whole file when line is also 0).
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, int line, int field, const std::string& message);

  int line() const noexcept { return line_; }
  int field() const noexcept { return field_; }

 private:
  int line_;
  int field_;
};

}  // namespace rplift
