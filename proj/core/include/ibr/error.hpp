#pragma once

#include <stdexcept>
#include <string>

namespace ibr {

// Root of every error thrown by the library. The CLI maps InputError to exit
// code 2 and NumericalError to exit code 3.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed arguments, shape mismatches, bad files.
class InputError : public Error {
public:
  using Error::Error;
};

// CSV header/column-count/emptiness problems.
class SchemaError : public InputError {
public:
  using InputError::InputError;
};

// Out-of-sample evaluation where the kernel weights all vanish.
class ExtrapolationError : public InputError {
public:
  using InputError::InputError;
};

class NumericalError : public Error {
public:
  using Error::Error;
};

// A smoothing parameter cannot be tuned to the requested degrees of freedom.
class CalibrationError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

// The base smoother has eigenvalues outside [0, 1]; the bias-reduction
// iteration does not converge.
class DivergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

}  // namespace ibr
