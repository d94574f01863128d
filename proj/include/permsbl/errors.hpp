#pragma once

#include <stdexcept>
#include <string>

namespace permsbl {

/// Invalid problem or solver configuration. The message names the violated
/// constraint.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anchor assignments that are not injective or out of range.
class InvalidAnchorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by exhaustive search when the number of free indices is too large.
class SizeGuardError : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// A factorization failed even after jitter, or a model quantity became
/// undefined (e.g. an all-zero signal when deriving the noise level).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sweep exceeded its failed-trial budget.
class FailureBudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace permsbl
