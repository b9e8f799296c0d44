#pragma once

#include <stdexcept>
#include <string>

namespace dcs {

/// Failure categories. Each maps onto a stable CLI exit code.
enum class ErrorKind { config, transport, data };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(ErrorKind::config, message) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

/// Remote dependency failure (embedder, LLM, scorer). `dependency` names the service.
class TransportError : public Error {
 public:
  TransportError(std::string dependency, const std::string& message)
      : Error(ErrorKind::transport, message), dependency_(std::move(dependency)) {}

  const std::string& dependency() const noexcept { return dependency_; }

 private:
  std::string dependency_;
};

/// A generation request touched a namespace reserved for evaluation.
class ContaminationError : public DataError {
 public:
  using DataError::DataError;
};

/// 2 = config, 3 = transport, 4 = data.
constexpr int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config:
      return 2;
    case ErrorKind::transport:
      return 3;
    case ErrorKind::data:
      return 4;
  }
  return 1;
}

}  // namespace dcs
