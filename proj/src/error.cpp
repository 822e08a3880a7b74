// SPDX-License-Identifier: Apache-2.0
#include "heml/error.hpp"

namespace heml {

const char* module_name(Module m) {
  switch (m) {
    case Module::kEmulator: return "emulator";
    case Module::kEncoding: return "encoding";
    case Module::kMatmul: return "matmul";
    case Module::kApprox: return "approx";
    case Module::kTraining: return "training";
    case Module::kCli: return "cli";
  }
  return "unknown";
}

const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::kContextMismatch: return "CONTEXT_MISMATCH";
    case ErrorCode::kDepthExhausted: return "DEPTH_EXHAUSTED";
    case ErrorCode::kShapeMismatch: return "SHAPE_MISMATCH";
    case ErrorCode::kResidualImaginary: return "RESIDUAL_IMAGINARY";
    case ErrorCode::kGridLimit: return "GRID_LIMIT";
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kMalformedInput: return "MALFORMED_INPUT";
    case ErrorCode::kProtocol: return "PROTOCOL";
    case ErrorCode::kIo: return "IO";
  }
  return "UNKNOWN";
}

int exit_status(Module m, ErrorCode c) {
  return 10 * (static_cast<int>(m) + 1) + static_cast<int>(c);
}

namespace {
std::string format_message(Module m, ErrorCode c, const std::string& detail) {
  std::string msg = "[";
  msg += module_name(m);
  msg += "] ";
  msg += error_code_name(c);
  msg += ": ";
  msg += detail;
  return msg;
}

std::string upper(const char* s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'a' && ch <= 'z') ch = static_cast<char>(ch - 'a' + 'A');
  }
  return out;
}
}  // namespace

Error::Error(Module module, ErrorCode code, const std::string& detail)
    : std::runtime_error(format_message(module, code, detail)), module_(module), code_(code) {}

std::string Error::tag() const {
  return "E-" + upper(module_name(module_)) + "-" + error_code_name(code_);
}

}  // namespace heml
