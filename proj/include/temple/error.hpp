#pragma once

#include <stdexcept>
#include <string>

namespace temple {

// Error taxonomy mirrors the CLI exit codes: input errors exit 1, backend
// failures exit 2, invariant violations exit 3.

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BackendError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvariantError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace temple
