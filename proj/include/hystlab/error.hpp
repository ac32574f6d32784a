#pragma once

#include <stdexcept>
#include <string>

namespace hystlab {

enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  Format = 4,
  Version = 5,
  DimensionMismatch = 6,
  Numeric = 7,
  NoSamples = 8,
};

// All library failures surface as this exception; the C API maps `code()`
// onto its status enum.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace hystlab
