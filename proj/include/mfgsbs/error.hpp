#ifndef MFGSBS_ERROR_HPP
#define MFGSBS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mfgsbs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent user input (files, specs, plans, manifests).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A graph violates the structural contract of the operation (e.g. a cycle
/// where a DAG is required).
class InvalidGraph : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// Arguments outside an operation's domain.
class DomainError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class TimeoutError : public Error {
public:
  using Error::Error;
};

}  // namespace mfgsbs

#endif  // MFGSBS_ERROR_HPP
