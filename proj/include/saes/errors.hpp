#pragma once

#include <stdexcept>
#include <string>

namespace saes {

enum class ErrorCode {
  NonSquare,
  NotSymmetric,
  NotPositiveDefinite,
  RankOutOfRange,
  RankDeficient,
  ShapeMismatch,
  DimensionMismatch,
  EmptyStats,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  TrailingBytes,
  InvalidActivationCode,
  InvalidStorageCode,
  InvalidHeader,
  NonFiniteValue,
  ChainMismatch,
  ConfigInvalid,
  IoError,
};

const char* error_code_name(ErrorCode code);

/// All typed failures thrown by this library. `code()` identifies the
/// condition; `what()` carries a one-line human-readable diagnostic.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace saes
