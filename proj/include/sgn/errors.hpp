// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace sgn {

/// Base class of every error raised by the engine.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes disagree (matmul inner dims, channel counts, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameter or flag combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced under strict mode, or non-finite objective.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; message carries the line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a dataset or checkpoint schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Bad data for the requested operation (empty split, label out of range).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Object used before it was initialized.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint written by an unsupported format version.
class VersionError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint payload failed its checksum or is truncated.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgn
