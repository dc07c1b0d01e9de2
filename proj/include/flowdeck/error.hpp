#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flowdeck {

enum class ErrorKind {
  kInvalidArgument,
  kTypeError,
  kEmptyInput,
  kInvalidMode,
  kUnsupportedInStream,
  kUnsupported,
  kParseError,
  kRuntimeAbort,
  kDeadlock,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid-argument";
    case ErrorKind::kTypeError: return "type-error";
    case ErrorKind::kEmptyInput: return "empty-input";
    case ErrorKind::kInvalidMode: return "invalid-mode";
    case ErrorKind::kUnsupportedInStream: return "unsupported-in-stream";
    case ErrorKind::kUnsupported: return "unsupported";
    case ErrorKind::kParseError: return "parse-error";
    case ErrorKind::kRuntimeAbort: return "runtime-abort";
    case ErrorKind::kDeadlock: return "deadlock";
  }
  return "unknown";
}

/// Base exception for every failure raised by the engine. The kind is the
/// machine-readable category; what() carries the human message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace flowdeck
