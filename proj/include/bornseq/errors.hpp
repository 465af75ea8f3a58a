#pragma once

#include <stdexcept>
#include <string>

namespace bornseq {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/matrix shapes do not fit the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix that must have full column rank does not.
class RankError : public Error {
 public:
  using Error::Error;
};

/// Caller-supplied data is out of range or malformed.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Model components disagree with each other (e.g. POVM and MPS dimensions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An object is not in the state an operation requires (e.g. W is not isometric).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Conditioning on an event of (numerically) zero probability.
class NullEventError : public Error {
 public:
  using Error::Error;
};

/// Text input does not follow the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint could not be restored.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace bornseq
