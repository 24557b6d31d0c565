#pragma once

#include <stdexcept>
#include <string>

namespace pdl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A reduction or statistic was asked for over an empty set.
class EmptySetError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API precondition (non-scalar loss, stale tape, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value; the CLI maps this to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class LabelError : public Error {
 public:
  using Error::Error;
};

/// A batch lacks the genuine/impostor pairs or triplets a loss needs.
class BatchCompositionError : public Error {
 public:
  using Error::Error;
};

class MissingClassError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class SamplerError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pdl
