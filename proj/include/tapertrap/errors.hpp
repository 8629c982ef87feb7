#pragma once

#include <stdexcept>
#include <string>

namespace tapertrap {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Bad configuration or malformed input file. Maps to CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Evaluation requested outside a model's validity region.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Linear system, calibration or fit failure. Maps to CLI exit code 3.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Non-confining potential: Hessian not positive definite.
class UnstableError : public Error {
 public:
  using Error::Error;
};

}  // namespace tapertrap
