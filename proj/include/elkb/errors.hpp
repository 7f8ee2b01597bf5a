#pragma once

#include <stdexcept>
#include <string>

namespace elkb {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem / OS level failures.
struct IoError : Error {
  using Error::Error;
};

// Bad magic, wrong version, truncated or inconsistent on-disk data.
struct FormatError : Error {
  using Error::Error;
};

// Lookup miss, distinct from I/O failure.
struct NotFoundError : Error {
  using Error::Error;
};

// Caller handed us something invalid (bad span, bad flag value, bad record).
struct ValidationError : Error {
  using Error::Error;
};

// Query tokenized to nothing; caller decides NIL handling.
struct EmptyQueryError : Error {
  using Error::Error;
};

}  // namespace elkb
