#pragma once

#include <stdexcept>

namespace paclab {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, invalid configs, mismatched label kinds.
// The CLI maps these to exit code 2; everything else exits 3.
struct ValidationError : Error {
    using Error::Error;
};

struct KindMismatchError : ValidationError {
    using ValidationError::ValidationError;
};

struct LabelRangeError : ValidationError {
    using ValidationError::ValidationError;
};

struct MissingTruthError : ValidationError {
    using ValidationError::ValidationError;
};

struct ParseError : ValidationError {
    using ValidationError::ValidationError;
};

struct UnknownClusterError : ValidationError {
    using ValidationError::ValidationError;
};

// The oracle could not answer a query.
struct OracleError : Error {
    using Error::Error;
};

// The implicit threshold gradient is undefined (saturated sigmoids or all
// losses zero at the threshold).
struct DegenerateGradientError : Error {
    using Error::Error;
};

}  // namespace paclab
