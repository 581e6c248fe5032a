#pragma once

#include <stdexcept>
#include <string>

namespace gradpred {

// Raised by the tensor engine and model code: shape mismatches, stale
// backward caches, non-finite values.
class EngineError : public std::runtime_error {
 public:
  explicit EngineError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised by config parsing/validation and the CLI.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gradpred
