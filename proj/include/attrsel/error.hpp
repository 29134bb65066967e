#pragma once

#include <stdexcept>
#include <string>

namespace attrsel {

enum class ErrorCode {
  InvalidArgument,
  ParseError,
  IoError,
  SizeMismatch,
  NonFinite,
  LabelOutOfRange,
  DimMismatch,
  ShapeMismatch,
  ZeroRow,
  ZeroVector,
  EmptyPool,
  TooManyForOrthonormal,
  ConfigError,
  BadK,
  KTooLarge,
  TooFewRows,
  FactorizationFailed,
  DivergenceDetected,
  BadClass,
  EmptyClass,
  BadIndex,
  EmptyName,
  TooFewClasses,
  NotFound,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_code_name(code)) + ": " + message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace attrsel
