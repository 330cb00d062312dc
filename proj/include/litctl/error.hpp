#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace litctl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not line-oriented.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Network or server-side failure that may succeed on retry.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Remote endpoint rejected the request; retrying will not help.
class ApiError : public Error {
public:
    using Error::Error;
};

} // namespace litctl
