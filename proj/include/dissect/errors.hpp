#ifndef DISSECT_ERRORS_HPP_
#define DISSECT_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dissect {

enum class ErrorKind {
  // usage
  InvalidArgument,
  SyntaxError,
  // I/O and file format
  Io,
  BadMagic,
  VersionUnsupported,
  LengthMismatch,
  ParseError,
  MalformedReport,
  // data validation
  DimensionMismatch,
  InvalidDimensions,
  UnknownConcept,
  UnknownUnit,
  DuplicateName,
  NonDenseIds,
  NonFiniteValue,
  ImageSetMismatch,
  EmptyActivations,
  EmptyCatalog,
  InstanceTooLarge,
  InvalidSpec,
};

const char* to_string(ErrorKind kind);

/// Process exit status for an error class: 1 usage, 2 I/O or format, 3 data validation.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by the logical-form parser. `position` is a 0-based byte offset.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, const std::string& expected,
              const std::string& found);
  std::size_t position() const noexcept { return position_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::string expected_;
};

}  // namespace dissect

#endif  // DISSECT_ERRORS_HPP_
