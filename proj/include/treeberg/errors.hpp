#pragma once

#include <stdexcept>
#include <string>

namespace treeberg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: bad vertex labels, inconsistent parameters, bad files.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A series or sum that the requested operation needs does not converge,
/// or its truncation tail is too large to be trusted.
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// An iterative method hit its iteration cap.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

/// A requested size exceeds a configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

} // namespace treeberg
