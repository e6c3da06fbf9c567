#pragma once

#include <iostream>
#include <stdexcept>
#include <string>

namespace maskfuse {

// Bad input: malformed files, invalid configuration, unknown references.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A broken internal invariant. Always a bug, never a data problem.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

inline void ensure(bool condition, const std::string& message) {
  if (!condition) throw InvariantError(message);
}

}  // namespace maskfuse
