#pragma once

#include <stdexcept>
#include <string>

namespace kgx {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file.
struct ParseError : Error {
  using Error::Error;
};

// File could not be opened or written.
struct IoError : Error {
  using Error::Error;
};

// Violated operation precondition or type invariant.
struct ContractError : Error {
  using Error::Error;
};

// Incompatible tensor shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Math op got input outside its domain (log of non-positive, zero divisor).
struct DomainError : Error {
  using Error::Error;
};

// A sampling procedure could not satisfy its postcondition.
struct SamplingError : Error {
  using Error::Error;
};

}  // namespace kgx
