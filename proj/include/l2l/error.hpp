#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace l2l {

enum class ErrorCode {
  ShapeMismatch,
  DomainError,
  IndexOutOfRange,
  AxisOutOfRange,
  ZeroLengthSequence,
  NonScalarLoss,
  NonFiniteLoss,
  MissingGradient,
  StrategyMismatch,
  BadImageShape,
  DegenerateAttribute,
  GammaOutOfRange,
  KTooLarge,
  IoError,
  ManifestError,
  TensorFormatError,
  LabelDomainError,
  ConfigError,
  IncompatibleCheckpoint,
  SampleNotFound,
};

std::string_view error_code_name(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// C API can translate it into a stable status value.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace l2l
