#pragma once

#include <stdexcept>
#include <string>

namespace cowdet {

/// Data or validation failure: malformed files, invariant violations,
/// shape mismatches. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Bad command-line usage or inconsistent options (exit code 1).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cowdet
