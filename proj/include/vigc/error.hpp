#pragma once

#include <stdexcept>
#include <string>

namespace vigc {

enum class ErrorCode {
  EmptyText,
  EmptyBank,
  ParseError,
  ParseFailed,
  DuplicateId,
  UnknownTask,
  InvalidStatus,
  InvalidArgument,
  PreconditionViolated,
  MissingAnnotation,
  EmptyLexicon,
  EmptyCategory,
  EmbedderFailure,
  IoError,
  Transport,
  Protocol,
  Timeout,
};

const char* to_string(ErrorCode code) noexcept;

/// Single exception type for the library; the code carries the contract-level
/// error kind so callers can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Backend failures worth another attempt. Protocol errors never are.
inline bool is_retryable(ErrorCode code) noexcept {
  return code == ErrorCode::Transport || code == ErrorCode::Timeout;
}

inline bool is_backend_error(ErrorCode code) noexcept {
  return code == ErrorCode::Transport || code == ErrorCode::Timeout || code == ErrorCode::Protocol;
}

}  // namespace vigc
