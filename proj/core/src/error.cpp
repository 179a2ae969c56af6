#include "langsup/error.hpp"

namespace langsup {

void throw_validation(const std::string& message) {
  throw Error(ErrorKind::kValidation, message);
}

void throw_transport(const std::string& message) {
  throw Error(ErrorKind::kTransport, message);
}

void throw_mismatch(const std::string& message) {
  throw Error(ErrorKind::kMismatch, message);
}

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kTransport:
      return 2;
    case ErrorKind::kValidation:
      return 3;
    case ErrorKind::kMismatch:
      return 4;
    case ErrorKind::kInternal:
      break;
  }
  return 1;
}

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kTransport:
      return "transport";
    case ErrorKind::kValidation:
      return "validation";
    case ErrorKind::kMismatch:
      return "mismatch";
    case ErrorKind::kInternal:
      break;
  }
  return "internal";
}

}  // namespace langsup
