#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace idard {

// Base of every error raised by the library. kind() is a stable
// machine-readable tag used in structured CLI error output.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& message)
      : Error("invalid_argument", message) {}
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& message)
      : Error("dimension", message) {}
};

class InvalidScale : public Error {
 public:
  explicit InvalidScale(const std::string& message)
      : Error("invalid_scale", message) {}
};

class DecodeError : public Error {
 public:
  DecodeError(const std::string& message, std::size_t offset)
      : Error("decode", message + " (at byte offset " +
                            std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class UnsupportedFormat : public Error {
 public:
  explicit UnsupportedFormat(const std::string& message)
      : Error("unsupported_format", message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message) : Error("io", message) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message)
      : Error("config", message) {}
};

class UndefinedCorrelation : public Error {
 public:
  explicit UndefinedCorrelation(const std::string& message)
      : Error("undefined_correlation", message) {}
};

// Malformed frame on the backend wire. The connection that produced it is
// unusable afterwards.
class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& message)
      : Error("protocol", message) {}
};

class BackendError : public Error {
 public:
  BackendError(const std::string& endpoint, const std::string& message_kind,
               const std::string& message)
      : Error("backend", "backend " + endpoint + " [" + message_kind +
                             "]: " + message),
        endpoint_(endpoint) {}

  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
};

class PluginError : public Error {
 public:
  PluginError(const std::string& message, int exit_code, std::string stderr_text)
      : Error("plugin", message), exit_code_(exit_code),
        stderr_(std::move(stderr_text)) {}

  // -1 when the process did not exit normally (timeout, signal, spawn failure).
  int exit_code() const { return exit_code_; }
  const std::string& captured_stderr() const { return stderr_; }

 private:
  int exit_code_;
  std::string stderr_;
};

}  // namespace idard
