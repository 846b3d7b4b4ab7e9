#pragma once

#include <stdexcept>
#include <string>

namespace iar {

enum class ErrorKind {
  schema,
  frequency,
  parse,
  insufficient_data,
  degeneracy,
  internal,
  selection,
  inference,
  undefined,
  fetch,
  io,
  invalid_argument,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::schema: return "schema error";
    case ErrorKind::frequency: return "frequency error";
    case ErrorKind::parse: return "parse error";
    case ErrorKind::insufficient_data: return "insufficient data";
    case ErrorKind::degeneracy: return "degeneracy error";
    case ErrorKind::internal: return "internal error";
    case ErrorKind::selection: return "selection error";
    case ErrorKind::inference: return "inference error";
    case ErrorKind::undefined: return "undefined";
    case ErrorKind::fetch: return "fetch error";
    case ErrorKind::io: return "io error";
    case ErrorKind::invalid_argument: return "invalid argument";
  }
  return "error";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it to an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace iar
