#pragma once

#include <stdexcept>
#include <string>

namespace nrsfm {

// Error taxonomy. CLI maps these to exit codes: usage -> 1,
// parse/schema -> 2, numeric/shape/contract -> 3.

struct Error : std::runtime_error {
    explicit Error(const std::string &msg) : std::runtime_error(msg) {}
};

// Dimension mismatch between operands.
struct ShapeError : Error {
    using Error::Error;
};

// Precondition violated by the caller (bad argument values).
struct ContractError : Error {
    using Error::Error;
};

// Iteration cap reached, NaN produced, or a numerically degenerate input.
struct NumericError : Error {
    using Error::Error;
};

// Camera estimate with sigma_min below the polar threshold.
struct DegenerateCameraError : NumericError {
    using NumericError::NumericError;
};

// Malformed record in an input file.
struct ParseError : Error {
    using Error::Error;
};

// Well-formed file with inconsistent structure (e.g. point counts).
struct SchemaError : Error {
    using Error::Error;
};

// Bad command line.
struct UsageError : Error {
    using Error::Error;
};

} // namespace nrsfm
