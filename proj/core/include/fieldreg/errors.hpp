#pragma once

#include <stdexcept>
#include <string>

namespace fieldreg {

/// Bad arguments, numeric contract violations, malformed specs.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// File and stream failures.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fieldreg
