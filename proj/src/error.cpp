#include "attrsel/error.hpp"

namespace attrsel {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::LabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::ZeroRow: return "ZeroRow";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyPool: return "EmptyPool";
    case ErrorCode::TooManyForOrthonormal: return "TooManyForOrthonormal";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::BadK: return "BadK";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::FactorizationFailed: return "FactorizationFailed";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::BadClass: return "BadClass";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::BadIndex: return "BadIndex";
    case ErrorCode::EmptyName: return "EmptyName";
    case ErrorCode::TooFewClasses: return "TooFewClasses";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace attrsel
