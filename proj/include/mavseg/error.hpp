// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mavseg {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Input violates a documented precondition or invariant. The CLI maps this to exit code 2.
class ValidationError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// MVOL format failures. All are ValidationErrors from the caller's point of view
// because they describe malformed input rather than an environment failure.
class BadMagic : public ValidationError {
public:
  using ValidationError::ValidationError;
};
class Truncated : public ValidationError {
public:
  using ValidationError::ValidationError;
};
class DtypeMismatch : public ValidationError {
public:
  using ValidationError::ValidationError;
};
class DimsOverflow : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class VersionError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class CorruptCheckpoint : public ValidationError {
public:
  using ValidationError::ValidationError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace mavseg
