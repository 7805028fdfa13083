#pragma once

#include <stdexcept>
#include <string>

namespace brb {

// Base of every error raised by the library. Each subclass maps onto one
// process exit code in the CLI (see harness/cli_exit.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ParseError : public InputError {
public:
    ParseError(const std::string& what, std::size_t line)
        : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// A caller broke an API contract (e.g. a stale forward cache).
class ContractError : public Error {
public:
    using Error::Error;
};

// An internal invariant of an algorithm failed (e.g. Lloyd inertia increased).
class InvariantError : public Error {
public:
    using Error::Error;
};

}  // namespace brb
