#pragma once

#include <stdexcept>
#include <string>

namespace bhc {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file (EDF, CSV, TOML, ...). Messages carry enough
/// context (byte offset, field, record index) to locate the defect.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input violated a documented precondition or invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace bhc
