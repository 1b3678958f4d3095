#pragma once

#include <stdexcept>
#include <string>

namespace paratope {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text (dataset records, config files, weight containers).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input that parses but violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Incompatible tensor shapes or layer configurations.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Non-finite values detected during a computation.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Weight container with an unknown version or mismatched model layout.
class VersionError : public Error {
public:
    using Error::Error;
};

}  // namespace paratope
