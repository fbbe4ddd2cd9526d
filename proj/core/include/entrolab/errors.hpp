#pragma once

#include <stdexcept>
#include <string>

namespace entrolab {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition: bad sizes, negative weights, out-of-range parameters.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A field was combined with a space it does not live on.
class SpaceMismatch : public Error {
public:
  using Error::Error;
};

/// The operation needs structure (e.g. a 1d grid) the given space lacks.
class UnsupportedSpace : public Error {
public:
  using Error::Error;
};

/// An iterative or spectral solver failed outright (as opposed to merely
/// stopping at max_iter, which is reported through result flags).
class SolverFailure : public Error {
public:
  using Error::Error;
};

/// Problems with scenario configuration files; maps to CLI exit code 2.
class ConfigError : public Error {
public:
  using Error::Error;
};

} // namespace entrolab
