// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qat {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are invalid for an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A forward or backward pass produced NaN or Inf.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

/// Misuse of the gradient graph (stale graph, non-scalar loss, ...).
class GraphError : public Error {
 public:
  using Error::Error;
};

/// Value outside the domain of a quantizer.
class QuantDomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset file.
class DataFormatError : public Error {
 public:
  using Error::Error;
};

/// Dataset directory or file does not exist.
class DatasetMissingError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, schedule, plan or experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable, corrupt or incompatible checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace qat
