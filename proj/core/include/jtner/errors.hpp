#pragma once

#include <stdexcept>
#include <string>

namespace jtner {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes (e.g. matmul inner dimensions).
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values where finite math is required. Overflow is an error,
// never a silent Inf/NaN.
struct NumericError : Error {
    using Error::Error;
};

// Out-of-range indices: class targets, token ids, layer/head selectors.
struct IndexError : Error {
    using Error::Error;
};

// Violated precondition or invalid configuration.
struct ContractError : Error {
    using Error::Error;
};

// File I/O and serialization problems.
struct IoError : Error {
    using Error::Error;
};

}  // namespace jtner
