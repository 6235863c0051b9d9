#pragma once

#include <stdexcept>
#include <string>

namespace tomopet {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs violate a documented invariant or precondition.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A file or byte buffer does not follow its declared binary layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem access failed (missing file, unwritable directory, short write).
class IoError : public Error {
public:
    using Error::Error;
};

/// Monte Carlo generation could not produce the requested events.
class SimulationError : public Error {
public:
    using Error::Error;
};

/// Data refers to entities (for example LOR bins) that do not exist.
class DataError : public Error {
public:
    using Error::Error;
};

/// A cached artifact was produced for a different scanner or image grid.
class GeometryMismatch : public ValidationError {
public:
    using ValidationError::ValidationError;
};

} // namespace tomopet
