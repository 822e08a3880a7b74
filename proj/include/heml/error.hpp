// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace heml {

enum class Module { kEmulator, kEncoding, kMatmul, kApprox, kTraining, kCli };

enum class ErrorCode {
  kContextMismatch,
  kDepthExhausted,
  kShapeMismatch,
  kResidualImaginary,
  kGridLimit,
  kInvalidArgument,
  kMalformedInput,
  kProtocol,
  kIo,
};

const char* module_name(Module m);
const char* error_code_name(ErrorCode c);

// Process exit status for a failure: 10 * (module + 1) + code, so the module is
// readable from the tens digit.
int exit_status(Module m, ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(Module module, ErrorCode code, const std::string& detail);

  Module module() const noexcept { return module_; }
  ErrorCode code() const noexcept { return code_; }
  // "E-<MODULE>-<CODE>", e.g. "E-EMULATOR-DEPTH_EXHAUSTED".
  std::string tag() const;

 private:
  Module module_;
  ErrorCode code_;
};

class DepthExhausted : public Error {
 public:
  DepthExhausted(Module module, const std::string& detail)
      : Error(module, ErrorCode::kDepthExhausted, detail) {}
};

class ShapeMismatch : public Error {
 public:
  ShapeMismatch(Module module, const std::string& detail)
      : Error(module, ErrorCode::kShapeMismatch, detail) {}
};

class ResidualImaginary : public Error {
 public:
  explicit ResidualImaginary(const std::string& detail)
      : Error(Module::kEncoding, ErrorCode::kResidualImaginary, detail) {}
};

}  // namespace heml
