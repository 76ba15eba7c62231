#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sgl0 {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not agree for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value. `field()` names the offending key when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message, std::string field = {})
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Data that violates an operation's input domain (e.g. label out of range).
class InputError : public Error {
 public:
  using Error::Error;
};

/// API misuse, such as requesting gradients before running backward.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. `offset()` is the byte offset where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t offset)
      : Error(message + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-finite loss or gradient during training.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::size_t epoch, std::size_t step)
      : Error(message + " (epoch " + std::to_string(epoch) + ", step " + std::to_string(step) + ")"),
        message_(message),
        epoch_(epoch),
        step_(step) {}
  const std::string& message() const noexcept { return message_; }
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::string message_;
  std::size_t epoch_;
  std::size_t step_;
};

}  // namespace sgl0
