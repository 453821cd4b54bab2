#pragma once

#include <stdexcept>
#include <string>

namespace shkan {

// Error categories double as process exit codes for the CLI (0 is success).
enum class ErrorKind : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kData = 3,
  kNumeric = 4,
  kIo = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace shkan
