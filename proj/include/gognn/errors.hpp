#pragma once

#include <stdexcept>
#include <string>

namespace gognn {

/// Malformed or inconsistent input data (files, ids, records). Distinct from
/// the tensor-level contract errors: callers typically surface these to the
/// user with exit code 2 rather than treating them as programming bugs.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace gognn
