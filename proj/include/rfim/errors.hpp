#pragma once

#include <stdexcept>
#include <string>

namespace rfim {

// Region or state space exceeds what the chosen exact solver can handle.
class CapacityError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Solver requires a region shape it was not given (e.g. transfer matrix on a
// non-rectangular region).
class UnsupportedShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation needs the Gaussian coordinates z / u'(z) of a push-forward field.
class MissingGaussianError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace rfim
