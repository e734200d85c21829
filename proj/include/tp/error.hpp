#pragma once

#include <stdexcept>
#include <string>

namespace tp {

// Violated precondition or malformed call (caller bug). Maps to exit code 2.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration. Maps to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure detected mid-run (NaN gradient etc.).
struct DiagnosticError : std::runtime_error {
  explicit DiagnosticError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void contract(bool ok, const std::string& msg) {
  if (!ok) throw ContractError(msg);
}

}  // namespace tp
