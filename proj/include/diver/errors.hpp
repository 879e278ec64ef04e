#pragma once

#include <stdexcept>
#include <string>

namespace diver {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct ZeroVectorError : Error {
    using Error::Error;
};
struct AllMaskedError : Error {
    using Error::Error;
};
struct DivergenceDetected : Error {
    using Error::Error;
};

// Provider-side failures.
struct TransportError : Error {
    using Error::Error;
};
struct ContextOverflow : Error {
    using Error::Error;
};
struct MissingVariable : Error {
    using Error::Error;
};
struct UnresolvableImage : Error {
    using Error::Error;
};
struct EmptyCompletion : Error {
    using Error::Error;
};

// Data / IO failures.
struct IoError : Error {
    using Error::Error;
};
struct DataError : Error {
    using Error::Error;
};
struct DuplicateId : DataError {
    using DataError::DataError;
};
struct EmptyCorpus : DataError {
    using DataError::DataError;
};

}  // namespace diver
