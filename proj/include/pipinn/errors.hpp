#pragma once

#include <stdexcept>
#include <string>

namespace pipinn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear algebra: a symmetric factorization hit a non-positive pivot.
// Usually means lambda_pi is too small for a rank-deficient gram matrix.
struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& what) : Error(what) {}
};

struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error(what) {}
};

// Derivative propagation met an activation without registered rules.
struct UnsupportedOperator : Error {
  explicit UnsupportedOperator(const std::string& what) : Error(what) {}
};

struct NonFiniteLoss : Error {
  explicit NonFiniteLoss(const std::string& what) : Error(what) {}
};

// Nonlinear assembly was requested without a linearization state.
struct MissingLinearization : Error {
  explicit MissingLinearization(const std::string& what) : Error(what) {}
};

struct NonFiniteIteration : Error {
  explicit NonFiniteIteration(const std::string& what) : Error(what) {}
};

struct QuadratureNonConvergent : Error {
  explicit QuadratureNonConvergent(const std::string& what) : Error(what) {}
};

struct CflViolation : Error {
  explicit CflViolation(const std::string& what) : Error(what) {}
};

struct NonFinite : Error {
  explicit NonFinite(const std::string& what) : Error(what) {}
};

struct ZeroReference : Error {
  explicit ZeroReference(const std::string& what) : Error(what) {}
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace pipinn
