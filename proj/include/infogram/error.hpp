#pragma once

#include <stdexcept>
#include <string>

namespace infogram {

/// Shape or dimensionality mismatch between operands.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// An argument violates a documented precondition (invalid order, empty
/// list, non-binary target, ...).
struct ContractError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Input data is numerically unusable: zero rows, zero trace, kernels
/// without positive diagonal, matrices that are not positive semi-definite.
struct DegenerateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A file does not follow the expected binary layout.
struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// The file layout is valid but uses an element type we do not handle.
struct UnsupportedDtypeError : FormatError {
    using FormatError::FormatError;
};

/// Declared sizes and actual payload disagree.
struct CorruptionError : FormatError {
    using FormatError::FormatError;
};

/// Filesystem-level failure (missing file, unwritable path).
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure at runtime: non-finite results, log of a
/// non-positive value, eigensolver non-convergence.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace infogram
