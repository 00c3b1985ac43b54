#pragma once

#include <stdexcept>
#include <string>

namespace lagtrend {

/// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { config, data, runtime };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Invalid configuration or precondition on caller-supplied parameters.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Malformed input files or data that cannot support the requested analysis.
class DataError : public Error {
public:
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Numerical or IO failure while running.
class RuntimeError : public Error {
public:
  explicit RuntimeError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

inline int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::runtime: return 3;
  }
  return 3;
}

}  // namespace lagtrend
