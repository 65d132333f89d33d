#pragma once

#include <stdexcept>
#include <string>

namespace decegy {

/// Malformed input or a violated data invariant (bad trace line, schema
/// mismatch, nonpositive energy, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A solver could not produce a usable answer (under-determined fit,
/// non-finite objective at the starting point).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace decegy
