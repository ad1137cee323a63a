#pragma once

#include <stdexcept>
#include <string>

namespace pointdep {

// Malformed inputs: shape mismatches, invalid configuration, bad files.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: calling operations out of order, empty batches.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Non-finite values encountered where finite ones are required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem and stream failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pointdep
