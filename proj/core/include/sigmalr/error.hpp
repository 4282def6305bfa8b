#pragma once

#include <stdexcept>
#include <string>

namespace sigmalr {

/// Bad input: shapes, ranks, modes, file contents, configuration.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a usable result.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factorisation failed even after regularisation. Callers may
/// retry with the eigendecomposition-based square root.
class CholeskyBreakdown : public NumericalError {
public:
  using NumericalError::NumericalError;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ValidationError(what);
}

}  // namespace sigmalr
