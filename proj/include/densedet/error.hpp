#pragma once

#include <stdexcept>
#include <string>

namespace densedet {

// Failure classes. The numeric values double as the CLI exit codes.
enum class ErrorKind : int {
  Io = 1,
  Input = 2,
  Verification = 3,
  Divergence = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_input(const std::string& what) {
  throw Error(ErrorKind::Input, what);
}

[[noreturn]] inline void fail_io(const std::string& what) {
  throw Error(ErrorKind::Io, what);
}

}  // namespace densedet
