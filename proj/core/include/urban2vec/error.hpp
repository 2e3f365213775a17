#pragma once

#include <stdexcept>
#include <string>

namespace urban2vec {

enum class ErrorKind {
  kInvalidInput,
  kNotFound,
  kDuplicateId,
  kFormat,
  kIo,
  kValidation,
  kStageOrder,
  kIntegrity,
  kUsage,
};

const char* to_string(ErrorKind kind);

// Single exception type for the library; callers switch on kind() when the
// category matters (the CLI maps it onto exit codes).
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace urban2vec
