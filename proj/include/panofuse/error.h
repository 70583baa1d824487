#pragma once

#include <stdexcept>
#include <string>

namespace panofuse {

enum class ErrorKind {
  kConfig,
  kIo,
  kBounds,
  kInvalidInput,
  kDegenerate,
  kInternal,
};

// Single exception type for the library; the kind selects the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ConfigError(const std::string& what) {
  return Error(ErrorKind::kConfig, what);
}
inline Error IoError(const std::string& what) {
  return Error(ErrorKind::kIo, what);
}
inline Error BoundsError(const std::string& what) {
  return Error(ErrorKind::kBounds, what);
}
inline Error InvalidInput(const std::string& what) {
  return Error(ErrorKind::kInvalidInput, what);
}
inline Error DegenerateInput(const std::string& what) {
  return Error(ErrorKind::kDegenerate, what);
}
inline Error InternalError(const std::string& what) {
  return Error(ErrorKind::kInternal, what);
}

// 0 success, 2 config, 3 IO, 4 numerical / degenerate input.
int ExitCodeFor(ErrorKind kind);

}  // namespace panofuse
