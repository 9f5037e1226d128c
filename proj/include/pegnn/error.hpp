#pragma once

#include <stdexcept>
#include <string>

namespace pegnn {

// Bad inputs, shape mismatches, malformed data and broken contracts.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values showing up where finite math was expected (diverged
// training, overflowing losses). The CLI maps this to exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace pegnn
