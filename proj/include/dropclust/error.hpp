#pragma once

#include <stdexcept>
#include <string>

namespace dropclust {

/// Failure category. Maps one-to-one onto the CLI exit codes.
enum class ErrorKind {
  Usage = 1,
  Validation = 2,
  Numerical = 3,
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_usage(const std::string& msg) {
  throw Error(ErrorKind::Usage, msg);
}
[[noreturn]] inline void fail_validation(const std::string& msg) {
  throw Error(ErrorKind::Validation, msg);
}
[[noreturn]] inline void fail_numerical(const std::string& msg) {
  throw Error(ErrorKind::Numerical, msg);
}

}  // namespace dropclust
