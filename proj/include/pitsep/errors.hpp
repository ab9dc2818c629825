#pragma once

#include <stdexcept>
#include <string>

namespace pitsep {

// Bad input data (files, manifests, malformed audio). CLI exit code 2.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite loss, diverged update). CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Contract violation at an API boundary (dimension mismatch, bad config).
class InvalidArgument : public std::invalid_argument {
 public:
  explicit InvalidArgument(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace pitsep
