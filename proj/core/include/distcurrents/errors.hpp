#pragma once

#include <stdexcept>
#include <string>

namespace distcurrents {

/// Raised when input data is structurally valid but numerically unusable:
/// every quadrature node masked, a level value that stays degenerate after
/// the perturbation budget, and similar conditions. The CLI maps this to
/// exit code 3; plain std::invalid_argument maps to exit code 2.
class DegenerateInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace distcurrents
