#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace langsup {

// Error categories. The CLI maps each one onto a process exit code.
enum class ErrorKind {
  kInternal,   // exit 1
  kTransport,  // exit 2: network, HTTP status, auth
  kValidation, // exit 3: schema, invariant, range, dimension, I/O on inputs
  kMismatch,   // exit 4: artifacts produced against different inputs
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_validation(const std::string& message);
[[noreturn]] void throw_transport(const std::string& message);
[[noreturn]] void throw_mismatch(const std::string& message);

int exit_code(ErrorKind kind) noexcept;
std::string_view to_string(ErrorKind kind) noexcept;

}  // namespace langsup
