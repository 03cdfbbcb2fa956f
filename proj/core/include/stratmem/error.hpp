// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stratmem {

enum class ErrorCode {
  kInvalidArgument,
  kSchemaViolation,
  kNotNormalized,
  kDimensionMismatch,
  kZeroVector,
  kMissingFile,
  kMalformedDocument,
  kVersionMismatch,
  kUnknownTemplate,
  kMissingSlot,
  kUnscriptedRequest,
  kTransport,
  kBudgetExceeded,
  kEnvironmentFault,
  kInvalidConfig,
  kRunAborted,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Transport failures carry whether a retry may help (timeouts, 429, 5xx).
class TransportError : public Error {
 public:
  TransportError(const std::string& message, bool transient)
      : Error(ErrorCode::kTransport, message), transient_(transient) {}

  bool transient() const noexcept { return transient_; }

 private:
  bool transient_;
};

}  // namespace stratmem
