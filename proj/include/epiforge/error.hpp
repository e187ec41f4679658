#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace epiforge {

enum class ErrorKind {
  InvalidArgument,
  DegenerateProjection,
  DegenerateConfiguration,
  InsufficientInliers,
  AmbiguousCheirality,
  ParallelRays,
  NoVisibleJoints,
  EmptyOverlap,
  DegenerateInput,
  InsufficientData,
  LengthMismatch,
  EmptyInput,
  ParseError,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this exception; kind() carries the
// category so callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace epiforge
