#pragma once

#include <stdexcept>
#include <string>

namespace lotus {

// Base class for every error thrown by the library. The CLI maps
// BackendError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller violated an operation precondition (bad n, empty text, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// An input file does not have the expected shape (header, columns).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// A value inside an otherwise well-formed input is out of domain.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Data required by the current mode is missing or unusable.
class DataError : public Error {
 public:
  using Error::Error;
};

// Two inputs that must agree do not (e.g. seed corpus vs. explanations).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// A backend answered, but with unusable content (e.g. empty response).
class ContentError : public Error {
 public:
  using Error::Error;
};

// File-system level failure (open/read/write).
class IoError : public Error {
 public:
  using Error::Error;
};

// An explanation backend failed (timeout, non-zero exit, HTTP error).
// Carries the id of the example whose request failed so callers can retry.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message, std::string example_id = "")
      : Error(message), example_id_(std::move(example_id)) {}

  const std::string& example_id() const noexcept { return example_id_; }

 private:
  std::string example_id_;
};

}  // namespace lotus
