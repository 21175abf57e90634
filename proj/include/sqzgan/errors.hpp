#pragma once

#include <stdexcept>
#include <string>

namespace sqzgan {

// Invalid shapes, unsupported settings, bad configuration files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values where finite ones are required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sqzgan
