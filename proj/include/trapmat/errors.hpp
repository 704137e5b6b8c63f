#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trapmat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad parameters or a missing security table entry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The requested dimension is too small for delegation to beat sending the input.
class DelegationUnprofitable : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Message arrived out of order, for the wrong session, or with an unexpected payload.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A server reply failed verification; the session has been torn down.
class DishonestServer : public Error {
 public:
  using Error::Error;
};

/// Malformed bytes on the wire.
class DecodeError : public ProtocolError {
 public:
  DecodeError(const std::string& what, std::size_t offset)
      : ProtocolError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

/// A targeted generator ran out of precomputed blocks and must be refilled.
class GeneratorExhausted : public Error {
 public:
  using Error::Error;
};

}  // namespace trapmat
