#pragma once

#include <stdexcept>
#include <string>

namespace semisam {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
struct ContractViolation : Error {
  using Error::Error;
};

struct ShapeMismatch : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

/// Raised when an objective term evaluates to NaN or infinity.
struct NonFiniteLoss : Error {
  NonFiniteLoss(std::string term, double value)
      : Error("non-finite loss term '" + term + "' (" + std::to_string(value) + ")"),
        term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace semisam
