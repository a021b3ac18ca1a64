#pragma once

#include <stdexcept>
#include <string>

namespace wquant {

// Base of all toolkit errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures (CLI exit code 3).
struct NumericalError : Error {
    using Error::Error;
};
struct NotPositiveDefinite : NumericalError {
    using NumericalError::NumericalError;
};
struct NoConvergence : NumericalError {
    using NumericalError::NumericalError;
};
struct AllZeroSpectrum : NumericalError {
    using NumericalError::NumericalError;
};
struct SingularSpectrum : NumericalError {
    using NumericalError::NumericalError;
};

// Malformed inputs (CLI exit code 2).
struct InputError : Error {
    using Error::Error;
};
struct DimensionMismatch : InputError {
    using InputError::InputError;
};
struct DimensionTooLarge : InputError {
    using InputError::InputError;
};
struct BadHeader : InputError {
    using InputError::InputError;
};
struct NonFinite : InputError {
    using InputError::InputError;
};
struct NotSquare : InputError {
    using InputError::InputError;
};
struct BadMagic : InputError {
    using InputError::InputError;
};
struct TruncatedPayload : InputError {
    using InputError::InputError;
};
struct ChecksumMismatch : InputError {
    using InputError::InputError;
};
struct IoFailure : InputError {
    using InputError::InputError;
};
struct CorruptContainer : InputError {
    using InputError::InputError;
};

} // namespace wquant
