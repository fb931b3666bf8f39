#pragma once

#include <stdexcept>
#include <string>

namespace adnet {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreement.
struct DimensionError : Error {
  using Error::Error;
};

// Out-of-range scalar argument (dropout rate, lambda, k, ...).
struct ParameterError : Error {
  using Error::Error;
};

// Class index or target outside the valid label set.
struct LabelError : Error {
  using Error::Error;
};

// Word not present in the vocabulary.
struct VocabularyError : LabelError {
  using LabelError::LabelError;
};

// Bad or insufficient dataset content (manifests, splits, empty vocab).
struct DataError : Error {
  using Error::Error;
};

// Filesystem / image decoding failure.
struct StorageError : DataError {
  using DataError::DataError;
};

// Character with no stroke template.
struct GlyphError : DataError {
  using DataError::DataError;
};

// NetworkConfig violates a structural constraint.
struct ConfigError : Error {
  using Error::Error;
};

// Checkpoint unreadable or inconsistent with the requested configuration.
struct CheckpointError : Error {
  using Error::Error;
};

// Training produced a non-finite loss.
struct DivergenceError : Error {
  DivergenceError(const std::string& what, std::size_t iteration)
      : Error(what), iteration(iteration) {}
  std::size_t iteration;
};

}  // namespace adnet
