#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdclt {

enum class ErrorKind {
  invalid_argument,
  not_spd,
  moment_diverges,
  degenerate,
  budget_exceeded,
  unresolvable,
  singular,
  guard_violated,
  cap_exceeded,
  context_mismatch,
  config,
  io,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::not_spd: return "not_spd";
    case ErrorKind::moment_diverges: return "moment_diverges";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::budget_exceeded: return "budget_exceeded";
    case ErrorKind::unresolvable: return "unresolvable";
    case ErrorKind::singular: return "singular";
    case ErrorKind::guard_violated: return "guard_violated";
    case ErrorKind::cap_exceeded: return "cap_exceeded";
    case ErrorKind::context_mismatch: return "context_mismatch";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

// All library failures are reported through this type; `kind()` is what the
// CLI writes into its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) throw Error(kind, message);
}

}  // namespace hdclt
