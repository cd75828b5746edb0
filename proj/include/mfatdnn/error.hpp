#pragma once

#include <stdexcept>
#include <string>

namespace mfatdnn {

// Every library failure derives from Error; the CLI maps each kind to its own
// exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// File-format failures (archives, checkpoints, trial/score files).
class FormatError : public Error {
 public:
  using Error::Error;
};

class TruncatedFileError : public FormatError {
 public:
  using FormatError::FormatError;
};

class VersionMismatchError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeMismatchError : public FormatError {
 public:
  ShapeMismatchError(const std::string& param, const std::string& what)
      : FormatError(what), param_(param) {}
  const std::string& param() const { return param_; }

 private:
  std::string param_;
};

}  // namespace mfatdnn
