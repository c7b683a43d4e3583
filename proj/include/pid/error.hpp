#pragma once

#include <stdexcept>
#include <string>

namespace pid {

// Every failure raised by the library derives from Error so callers can
// catch the whole family at a stage boundary.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string &what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Wraps a failure with the pipeline stage it happened in.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string &what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}

    const std::string &stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

} // namespace pid
