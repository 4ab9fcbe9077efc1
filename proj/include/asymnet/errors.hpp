#pragma once

#include <stdexcept>
#include <string>

namespace asymnet {

// Root of every error the library throws. The CLI maps these to exit code 1;
// anything else escaping a command is treated as an internal failure.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ProfileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientSamplesError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class UnsupportedLayerError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace asymnet
