#pragma once

#include <stdexcept>
#include <string>

namespace cycledance {

/// Bad shapes, malformed files, invalid configs. CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

/// Non-finite values where finite ones are required. CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cycledance
