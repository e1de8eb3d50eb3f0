// errors.hpp
// Exception hierarchy shared by all fbgforce modules.

#pragma once

#include <stdexcept>
#include <string>

namespace fbg {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Conversion is being asked about a shift below the calibrated model's range.
struct NegativeDiscriminantError : Error {
    using Error::Error;
};

// A type invariant was violated (non-finite value, wrong sign, inconsistent ratio...).
struct InvariantViolationError : Error {
    using Error::Error;
};

struct InsufficientDataError : Error {
    using Error::Error;
};

struct DegenerateSystemError : Error {
    using Error::Error;
};

struct ZeroDivisorError : Error {
    using Error::Error;
};

struct NoOverlapError : Error {
    using Error::Error;
};

struct LengthMismatchError : Error {
    using Error::Error;
};

struct ParseError : Error {
    ParseError(const std::string& msg, long line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    long line_number;
};

struct MonotonicityError : Error {
    using Error::Error;
};

struct SchemaError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct OutOfPlanError : Error {
    using Error::Error;
};

struct BindError : Error {
    using Error::Error;
};

struct ConnectError : Error {
    using Error::Error;
};

struct ProtocolError : Error {
    using Error::Error;
};

} // namespace fbg
