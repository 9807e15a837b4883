#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace csk {

enum class ErrorCode {
  ZeroTristimulus,
  DegenerateTriangle,
  SingularMatrix,
  OutOfGamut,
  GridMismatch,
  SyncNotFound,
  OutOfBounds,
  AnchorUnderflow,
  Underdetermined,
  RankDeficient,
  ShapeMismatch,
  LengthMismatch,
  EmptyResults,
  InvalidArgument,
  Config,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace csk
