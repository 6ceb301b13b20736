#include "rplift/error.hpp"

namespace rplift {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::DegenerateEncoding: return "DegenerateEncoding";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::SingularNormalEquations: return "SingularNormalEquations";
    case ErrorCode::UnknownInstance: return "UnknownInstance";
    case ErrorCode::MissingAngles: return "MissingAngles";
    case ErrorCode::EmptyScene: return "EmptyScene";
    case ErrorCode::FrameMismatch: return "FrameMismatch";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::MalformedMatrix: return "MalformedMatrix";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

namespace {

std::string with_location(int line, int field, const std::string& message) {
  std::string loc;
  if (line > 0) loc += "line " + std::to_string(line);
  if (field > 0) loc += (loc.empty() ? "" : ", ") + std::string("field ") + std::to_string(field);
  return loc.empty() ? message : loc + ": " + message;
}

}  // namespace

ParseError::ParseError(ErrorCode code, int line, int field, const std::string& message)
    : Error(code, with_location(line, field, message)), line_(line), field_(field) {}

}  // namespace rplift
