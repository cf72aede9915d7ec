#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clinbench {

/// Failure categories raised by the core library. The C API maps these onto
/// status codes; the CLI maps those onto exit codes.
enum class ErrorKind {
  Dimension,
  Contract,
  Numeric,
  Index,
  InvalidProbability,
  Schema,
  Parse,
  Validation,
  Sampling,
  Label,
  NoEvents,
  UndefinedMetric,
  Unavailable,
  Integrity,
  Io,
  Build,
  Fit,
  Divergence,
};

std::string_view to_string(ErrorKind kind);

/// True for errors caused by bad user input (exit code 1 at the CLI).
bool is_validation_kind(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace clinbench
