#include "common/error.hpp"

namespace clinbench {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Contract: return "contract error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Index: return "index error";
    case ErrorKind::InvalidProbability: return "invalid probability";
    case ErrorKind::Schema: return "schema error";
    case ErrorKind::Parse: return "parse error";
    case ErrorKind::Validation: return "validation error";
    case ErrorKind::Sampling: return "sampling error";
    case ErrorKind::Label: return "label error";
    case ErrorKind::NoEvents: return "no events";
    case ErrorKind::UndefinedMetric: return "undefined metric";
    case ErrorKind::Unavailable: return "unavailable embedding";
    case ErrorKind::Integrity: return "integrity error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Build: return "build error";
    case ErrorKind::Fit: return "fit error";
    case ErrorKind::Divergence: return "divergence";
  }
  return "error";
}

bool is_validation_kind(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Schema:
    case ErrorKind::Parse:
    case ErrorKind::Validation:
    case ErrorKind::Label:
    case ErrorKind::Build:
    case ErrorKind::InvalidProbability:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace clinbench
