#pragma once

#include <stdexcept>
#include <string>

namespace catres {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration: unknown labels, bad parameters, regime refusals.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operands defined on incompatible layouts or with the wrong mode set.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A Fock-space truncation is too small for the requested state.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// A precondition on numerical input was violated (e.g. non-Hermitian H).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An integrator could not meet its tolerance.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& what, double achieved)
      : Error(what), achieved_(achieved) {}
  double achieved_error() const { return achieved_; }

 private:
  double achieved_;
};

/// A least-squares problem was too ill-conditioned to answer honestly.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

}  // namespace catres
