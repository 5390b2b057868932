#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hda {

enum class ErrorKind {
  config,            // malformed or schema-violating configuration
  data,              // bad dataset content, IO failures, preprocessing collapse
  shape,             // tensor / matrix dimension disagreement
  contract,          // precondition violated by the caller
  numeric,           // factorization failure, non-PSD input
  diverged,          // non-finite loss or gradient during training
  missing_artifact,  // a checkpoint or intermediate output is absent
  usage,             // API misuse (e.g. backward without a forward tape)
};

std::string_view to_string(ErrorKind kind) noexcept;

// Process exit status for a given error kind (0 is success, 1 is reserved for
// unexpected failures).
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::string path = {})
      : std::runtime_error(message), kind_(kind), path_(std::move(path)) {}

  ErrorKind kind() const noexcept { return kind_; }
  // File path or JSON pointer the error refers to, if any.
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorKind kind_;
  std::string path_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message, std::string path = {}) {
  throw Error(kind, message, std::move(path));
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace hda
