#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace abkb {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Operation invoked in a state that does not allow it (out-of-sequence event, ...).
class InvalidState : public Error {
public:
    using Error::Error;
};

/// Angle requested between coincident positions.
class UndefinedAngle : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("digraph corpus is empty") {}
};

/// Brute-force enumeration refused because the instance is too large.
class SizeGuard : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace abkb
