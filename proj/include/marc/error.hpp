#pragma once

#include <stdexcept>
#include <string>

namespace marc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not conform for the named operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A forward or backward value became NaN/Inf.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Caller passed a value outside an operation's domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

enum class FormatErrc {
    bad_magic,
    bad_version,
    truncated,
    count_mismatch,
    malformed,
};

/// Raised by the file readers; `code()` distinguishes the failure kinds.
class FormatError : public Error {
public:
    FormatError(FormatErrc code, const std::string& what) : Error(what), code_(code) {}
    FormatErrc code() const noexcept { return code_; }

private:
    FormatErrc code_;
};

}  // namespace marc
