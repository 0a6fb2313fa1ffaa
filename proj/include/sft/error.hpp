#pragma once

#include <stdexcept>
#include <string>

namespace sft {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor extents disagree with what an operation requires.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An integer index (token id, class id) lies outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// A configuration value is invalid (dropout p >= 1, unknown preset, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

class EncodingError : public Error {
 public:
  using Error::Error;
};

class TokenizerError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the given input (e.g. AUROC with a single class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace sft
