#pragma once

#include <stdexcept>
#include <string>

namespace mcband {

/// Base class of every error raised by the library. The exit code is what
/// the command-line front end reports for an uncaught error of this kind.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 2; }
  virtual const char* kind() const noexcept { return "error"; }
};

/// Invalid argument values (empty samples, a >= b, alpha outside (0,1), ...).
class DomainError : public Error
{
public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

/// Inconsistent configuration (weights violating a normalization, empty
/// Lepski grid, unsupported basis for an operation, ...).
class ConfigError : public Error
{
public:
  ConfigError(const std::string& field, const std::string& message)
    : Error(field.empty() ? message : field + ": " + message)
    , field_(field)
  {}
  explicit ConfigError(const std::string& message)
    : ConfigError("", message)
  {}
  const std::string& field() const noexcept { return field_; }
  const char* kind() const noexcept override { return "config"; }

private:
  std::string field_;
};

/// Numerical failure: positivity floor, ill-conditioning, diverging paths.
class NumericalError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "numerical"; }
};

/// The density estimate dropped below the positivity floor somewhere on the
/// interval of interest. Carries the offending x-range.
class PositivityError : public NumericalError
{
public:
  PositivityError(double x_lo, double x_hi, double floor_value)
    : NumericalError("density estimate below positivity floor " +
                     std::to_string(floor_value) + " on [" +
                     std::to_string(x_lo) + ", " + std::to_string(x_hi) + "]")
    , x_lo_(x_lo)
    , x_hi_(x_hi)
  {}
  double x_lo() const noexcept { return x_lo_; }
  double x_hi() const noexcept { return x_hi_; }
  const char* kind() const noexcept override { return "positivity"; }

private:
  double x_lo_;
  double x_hi_;
};

class ConditioningError : public NumericalError
{
public:
  using NumericalError::NumericalError;
  const char* kind() const noexcept override { return "conditioning"; }
};

class SimulationError : public NumericalError
{
public:
  SimulationError(const std::string& message, long long step)
    : NumericalError(message + " at step " + std::to_string(step))
    , step_(step)
  {}
  long long step() const noexcept { return step_; }
  const char* kind() const noexcept override { return "simulation"; }

private:
  long long step_;
};

class IoError : public Error
{
public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
  const char* kind() const noexcept override { return "io"; }
};

} // namespace mcband
