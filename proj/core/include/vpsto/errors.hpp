#pragma once

#include <stdexcept>
#include <string>

namespace vpsto {

// No finite duration satisfies the kinodynamic limits (a boundary velocity
// lies outside the velocity bounds).
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A warm-start source trajectory has already been fully executed.
class ExpiredError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vpsto
