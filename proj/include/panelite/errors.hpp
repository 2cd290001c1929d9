#ifndef PANELITE_ERRORS_HPP
#define PANELITE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace panelite {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid input: malformed files, broken invariants, bad configuration.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Numerical failure during estimation.
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& msg) : Error(msg) {}
};

// A matrix that must be inverted is singular beyond tolerance. Carries the
// extreme singular values of the offending matrix as condition diagnostics.
class SingularityError : public EstimationError {
 public:
  SingularityError(const std::string& msg, double smallest, double largest)
      : EstimationError(msg + " (smallest singular value " +
                        std::to_string(smallest) + ", largest " +
                        std::to_string(largest) + ")"),
        smallest_singular_value(smallest),
        largest_singular_value(largest) {}

  double smallest_singular_value;
  double largest_singular_value;
};

}  // namespace panelite

#endif  // PANELITE_ERRORS_HPP
