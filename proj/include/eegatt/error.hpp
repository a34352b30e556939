#pragma once

#include <stdexcept>
#include <string>

namespace eegatt {

// Numeric values are part of the C API (see eegatt.h) and of the CLI exit codes.
enum class ErrorCode : int {
  kGeneric = 1,
  kUsage = 2,
  kUnknownModel = 3,
  kFormat = 4,
  kMissingClass = 5,
  kIo = 6,
  kDimension = 7,
  kConfig = 8,
  kState = 9,
  kLabel = 10,
  kLookup = 11,
  kNumerical = 12,
  kTraining = 13,
  kPreprocess = 14,
  kStructure = 15,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace eegatt
