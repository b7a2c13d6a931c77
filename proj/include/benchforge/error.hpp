#pragma once

#include <stdexcept>
#include <string>

namespace benchforge {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input documents that violate a schema or an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Agent or file output that cannot be turned into a structured document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A required upstream artifact (file, run product) is missing.
class MissingArtifactError : public Error {
 public:
  using Error::Error;
};

/// Failure talking to a model provider. `retriable()` drives the gateway's
/// backoff loop; `status()` is the HTTP status or 0 for connection-level faults.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool retriable, int status = 0, long retry_after_ms = -1)
      : Error(what), retriable_(retriable), status_(status), retry_after_ms_(retry_after_ms) {}

  bool retriable() const noexcept { return retriable_; }
  int status() const noexcept { return status_; }
  /// Server-requested delay (Retry-After), or -1.
  long retry_after_ms() const noexcept { return retry_after_ms_; }

 private:
  bool retriable_;
  int status_;
  long retry_after_ms_;
};

}  // namespace benchforge
