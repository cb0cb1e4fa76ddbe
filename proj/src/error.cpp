#include "l2l/error.hpp"

namespace l2l {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::AxisOutOfRange: return "AxisOutOfRange";
    case ErrorCode::ZeroLengthSequence: return "ZeroLengthSequence";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MissingGradient: return "MissingGradient";
    case ErrorCode::StrategyMismatch: return "StrategyMismatch";
    case ErrorCode::BadImageShape: return "BadImageShape";
    case ErrorCode::DegenerateAttribute: return "DegenerateAttribute";
    case ErrorCode::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::TensorFormatError: return "TensorFormatError";
    case ErrorCode::LabelDomainError: return "LabelDomainError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::SampleNotFound: return "SampleNotFound";
  }
  return "Unknown";
}

}  // namespace l2l
