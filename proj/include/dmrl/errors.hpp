#pragma once

#include <stdexcept>
#include <string>

namespace dmrl {

// Bad run configuration / schema violation. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Violated precondition or contract on a library call.
struct ContractError : std::logic_error {
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

// Trajectory space exceeds the enumeration cap.
struct EnumerationCapExceeded : std::runtime_error {
  explicit EnumerationCapExceeded(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace dmrl
