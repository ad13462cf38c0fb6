#pragma once

#include <stdexcept>
#include <string>

namespace mpsim {

/// Bad user-supplied data: malformed files, invalid parameter values,
/// exhausted replay proposals. CLI maps this to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown at runtime: non-finite energies, unsolvable
/// normal equations. CLI maps this to exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mpsim
