#pragma once

#include <stdexcept>
#include <string>

namespace annonet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A caller passed arguments that violate an operation's precondition.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// A report file could not be ingested.
class IngestError : public Error {
public:
  IngestError(std::string field, const std::string& message)
      : Error(message), field_(std::move(field)) {}

  /// Name of the offending metadata field, empty when not field-specific.
  [[nodiscard]] const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

/// A codebook, topic space or dataset document failed validation.
class ValidationError : public Error {
public:
  using Error::Error;
};

/// Model output could not be parsed into the expected structure.
class ParseError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// The replay store has no entry for a request.
class ReplayMiss : public Error {
public:
  explicit ReplayMiss(std::string fingerprint)
      : Error("replay miss for fingerprint " + fingerprint),
        fingerprint_(std::move(fingerprint)) {}

  [[nodiscard]] const std::string& fingerprint() const noexcept { return fingerprint_; }

private:
  std::string fingerprint_;
};

/// Network failure or retry budget exhausted.
class TransportError : public Error {
public:
  using Error::Error;
};

/// The backend answered with a non-success HTTP status.
class BackendError : public Error {
public:
  BackendError(int status, const std::string& body)
      : Error("backend returned HTTP " + std::to_string(status) + ": " + body), status_(status) {}

  [[nodiscard]] int status() const noexcept { return status_; }

private:
  int status_;
};

/// Broken internal invariant; should be unreachable.
class InternalError : public Error {
public:
  using Error::Error;
};

}  // namespace annonet
