#pragma once

#include <stdexcept>
#include <string>

namespace splinemsm {

// Raised when inputs violate a documented precondition: malformed data files,
// inconsistent model configuration, out-of-range arguments.  The CLI maps
// these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a computation cannot be completed to acceptable accuracy even
// after fallbacks: transition probabilities materially negative, covariance
// matrices indefinite beyond tolerance, and similar.  The CLI maps these to
// exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace splinemsm
