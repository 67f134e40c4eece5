#pragma once

#include <stdexcept>
#include <string>

namespace netchoice {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document (schema, unknown keys, duplicate entries).
class ParseError : public Error {
  public:
    using Error::Error;
};

/// Numeric content violates a structural invariant (negative entry, bad row sum, p_ii != 0).
class ModelError : public Error {
  public:
    using Error::Error;
};

/// Collective decisiveness fails, so (I - P)^{-1} is not defined.
class AssumptionError : public Error {
  public:
    using Error::Error;
};

/// Argument outside the documented domain of an operation.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Iteration limit, infeasible program, or numerical breakdown.
class ComputationError : public Error {
  public:
    using Error::Error;
};

} // namespace netchoice
