#pragma once

#include <stdexcept>
#include <string>

namespace beamlqr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failures: synthesis, oracle, simulation, quadrature.
class NumericError : public Error {
 public:
  using Error::Error;
};

class NegativeDiscriminant : public NumericError {
 public:
  using NumericError::NumericError;
};

class BetaZero : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotStabilizable : public NumericError {
 public:
  using NumericError::NumericError;
};

class IllConditioned : public NumericError {
 public:
  using NumericError::NumericError;
};

class MissingModes : public NumericError {
 public:
  using NumericError::NumericError;
};

class GridTooCoarse : public NumericError {
 public:
  using NumericError::NumericError;
};

class HorizonTooLong : public NumericError {
 public:
  using NumericError::NumericError;
};

class NotDecayed : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid user input: bad parameters, weight profiles, config files.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InvalidProfile : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

}  // namespace beamlqr
