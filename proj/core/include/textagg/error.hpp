#pragma once

#include <stdexcept>
#include <string>

namespace textagg {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape mismatches, out-of-range ids, bad option values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Pooling was asked to reduce a sequence with no poolable positions.
class EmptySequenceError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Values that parse fine but violate a numeric or semantic contract
// (non-finite weights, metric inputs out of order, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class BuildError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed interchange files. Subclasses name the failure.
class ParseError : public Error {
 public:
  using Error::Error;
};

class BadMagicError : public ParseError {
 public:
  using ParseError::ParseError;
};

class BadVersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

class TruncatedError : public ParseError {
 public:
  using ParseError::ParseError;
};

class SizeMismatchError : public ParseError {
 public:
  using ParseError::ParseError;
};

class DuplicateNameError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace textagg
