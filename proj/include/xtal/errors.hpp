#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xtal {

// Error categories map 1:1 onto CLI exit codes.
enum class ErrorCategory {
  Usage = 2,    // bad arguments, unknown config keys, conflicting flags
  Data = 3,     // unreadable/invalid input files, shape mismatches
  Numeric = 4,  // NaN/Inf propagation, degenerate linear algebra
};

// Single exception type for the whole library. `code` is a stable
// machine-readable tag ("out_of_range", "parse_error", ...); `what()` carries
// the human-readable context.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, const std::string& message)
      : std::runtime_error(message), category_(category), code_(std::move(code)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& code() const noexcept { return code_; }
  int exit_code() const noexcept { return static_cast<int>(category_); }

 private:
  ErrorCategory category_;
  std::string code_;
};

[[noreturn]] inline void throw_usage(std::string_view code, const std::string& msg) {
  throw Error(ErrorCategory::Usage, std::string(code), msg);
}
[[noreturn]] inline void throw_data(std::string_view code, const std::string& msg) {
  throw Error(ErrorCategory::Data, std::string(code), msg);
}
[[noreturn]] inline void throw_numeric(std::string_view code, const std::string& msg) {
  throw Error(ErrorCategory::Numeric, std::string(code), msg);
}

}  // namespace xtal
