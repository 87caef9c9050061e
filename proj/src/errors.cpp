#include "dissect/errors.hpp"

namespace dissect {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::Io: return "Io";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::VersionUnsupported: return "VersionUnsupported";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MalformedReport: return "MalformedReport";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidDimensions: return "InvalidDimensions";
    case ErrorKind::UnknownConcept: return "UnknownConcept";
    case ErrorKind::UnknownUnit: return "UnknownUnit";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::NonDenseIds: return "NonDenseIds";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::ImageSetMismatch: return "ImageSetMismatch";
    case ErrorKind::EmptyActivations: return "EmptyActivations";
    case ErrorKind::EmptyCatalog: return "EmptyCatalog";
    case ErrorKind::InstanceTooLarge: return "InstanceTooLarge";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::SyntaxError:
      return 1;
    case ErrorKind::Io:
    case ErrorKind::BadMagic:
    case ErrorKind::VersionUnsupported:
    case ErrorKind::LengthMismatch:
    case ErrorKind::ParseError:
    case ErrorKind::MalformedReport:
      return 2;
    default:
      return 3;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

SyntaxError::SyntaxError(std::size_t position, const std::string& expected,
                         const std::string& found)
    : Error(ErrorKind::SyntaxError,
            "syntax error at position " + std::to_string(position) +
                ": expected " + expected + ", found " + found),
      position_(position),
      expected_(expected) {}

}  // namespace dissect
