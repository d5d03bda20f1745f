#pragma once

#include <stdexcept>
#include <string>

namespace spinmaser {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: unknown parameter names, schema or unit violations,
/// models that fail validation.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Integration or steady-state search did not reach the requested accuracy.
class ConvergenceError : public Error {
public:
  using Error::Error;
};

/// Broken internal invariant. Never expected in correct use.
class InternalError : public Error {
public:
  using Error::Error;
};

} // namespace spinmaser
