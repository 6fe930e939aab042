#pragma once

#include <stdexcept>
#include <string>

namespace copd {

// Invalid configuration or malformed input: rejected before any compute.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure at run time (non-finite logits, blown-up updates).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace copd
