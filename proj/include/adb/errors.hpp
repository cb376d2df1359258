#ifndef ADB_ERRORS_HPP
#define ADB_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace adb {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Grammar failure while parsing text input; carries the byte offset of the
// first offending character.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// A structurally well-formed input violated an invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Coordinate, box, or positional index out of bounds.
class RangeError : public Error {
public:
    using Error::Error;
};

class NotFoundError : public Error {
public:
    using Error::Error;
};

// Name already taken.
class ConflictError : public Error {
public:
    using Error::Error;
};

// Unknown or unreadable array version.
class VersionError : public Error {
public:
    using Error::Error;
};

// Stored bytes failed a digest or framing check.
class CorruptionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Operation applied to an incompatible value kind.
class TypeError : public Error {
public:
    using Error::Error;
};

// Benchmark timing could not be computed (e.g. below clock resolution).
class MeasurementError : public Error {
public:
    using Error::Error;
};

}  // namespace adb

#endif  // ADB_ERRORS_HPP
