#pragma once

#include <stdexcept>
#include <string>

namespace nestgam {

enum class ErrorCode {
  InvalidArgument = 1,
  Config = 2,
  Data = 3,
  Io = 4,
  Numeric = 5,
  NotConverged = 6,
  Internal = 7,
};

/// Exception carrying a category code that the C API maps onto status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool ok, const std::string& msg, ErrorCode code = ErrorCode::InvalidArgument) {
  if (!ok) throw Error(code, msg);
}

}  // namespace nestgam
