#pragma once

#include <stdexcept>
#include <string>

namespace convgame {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A name was used with a pool that does not contain it.
class PoolMembershipError : public Error {
 public:
  using Error::Error;
};

/// Records appended to a memory window out of round order.
class OrderingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A log is too short for the requested analysis window.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// No in-pool name could be extracted from a model response.
class ParseError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

/// Retryable transport failure (network, 5xx, rate limiting).
class TransientTransportError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// HTTP 429 or equivalent; retried, and reported as QuotaError once the
/// retry budget is spent.
class RateLimitError : public TransientTransportError {
 public:
  using TransientTransportError::TransientTransportError;
};

class AuthError : public TransportError {
 public:
  using TransportError::TransportError;
};

class QuotaError : public TransportError {
 public:
  using TransportError::TransportError;
};

}  // namespace convgame
