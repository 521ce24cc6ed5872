#pragma once

#include <stdexcept>
#include <string>

namespace modered {

// Error categories shared between the C++ core and the C API status codes.
enum class ErrorCode {
  ok = 0,
  invalid_argument,
  dimension_mismatch,
  grid_mismatch,
  insufficient_history,
  generation_failed,
  nonpositive_area,
  invalid_correlation,
  numerical_blowup,
  io_failure,
  stage_failed,
  unknown,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace modered
