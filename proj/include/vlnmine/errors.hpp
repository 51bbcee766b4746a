#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vlnmine {

// Base class for all toolkit errors. Subclasses name the failure class so
// callers can catch selectively; the message carries the specifics.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- model i/o ---

struct MissingModelFile : Error {
  using Error::Error;
};

// Malformed model data. `where` is a byte offset for binary inputs and a
// line number for text inputs; -1 when not applicable.
struct ParseError : Error {
  ParseError(const std::string& msg, std::int64_t where = -1)
      : Error(where >= 0 ? msg + " (at " + std::to_string(where) + ")" : msg),
        locator(where) {}
  std::int64_t locator;
};

struct IoError : Error {
  using Error::Error;
};

// --- geometry / merging ---

struct InsufficientOverlap : Error {
  using Error::Error;
};

struct DegenerateConfiguration : Error {
  using Error::Error;
};

struct InvalidInput : Error {
  using Error::Error;
};

// --- mining ---

struct ScaleUndetermined : Error {
  using Error::Error;
};

// --- annotation ---

struct DegenerateBox : Error {
  using Error::Error;
};

struct VocabularyError : Error {
  using Error::Error;
};

// --- instruction generation ---

struct EmptyTrajectory : Error {
  using Error::Error;
};

struct ServiceUnavailable : Error {
  using Error::Error;
};

struct RequestRejected : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

// --- dataset emission ---

struct SchemaError : Error {
  using Error::Error;
};

struct ConsistencyError : Error {
  using Error::Error;
};

// --- metrics ---

struct InvalidReference : Error {
  using Error::Error;
};

}  // namespace vlnmine
