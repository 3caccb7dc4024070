#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace margin {

/// Base class for every recoverable error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual const char* kind() const noexcept { return "error"; }
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }
    const char* kind() const noexcept override { return "parse_error"; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "validation_error"; }
};

class InsufficientHistory : public Error {
public:
    InsufficientHistory(std::size_t required, std::size_t available, const std::string& what)
        : Error(what + " (requires at least " + std::to_string(required) + " closes, have " +
                std::to_string(available) + ")"),
          required_(required) {}
    std::size_t required() const noexcept { return required_; }
    const char* kind() const noexcept override { return "insufficient_history"; }

private:
    std::size_t required_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "precondition_error"; }
};

class SizeError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "size_error"; }
};

class IoError : public Error {
public:
    using Error::Error;
    const char* kind() const noexcept override { return "io_error"; }
};

}  // namespace margin
